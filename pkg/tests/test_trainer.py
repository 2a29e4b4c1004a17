import numpy as np
import pytest

from asnets.errors import EmptyMemory
from asnets.evaluate import evaluate
from asnets.generators import generate
from asnets.grounder import ground
from asnets.model import add_grads
from asnets.ppddl import parse_domain, parse_problem
from asnets.ssp import is_terminal
from asnets.trainer import TrainConfig, Trainer, train

from toys import strips_task


def _gen(kind, sizes):
    d = parse_domain(generate(kind, 1)[0])
    return d, [ground(d, parse_problem(generate(kind, n)[1], d)) for n in sizes]


def _two_costs():
    return strips_task(props=["s", "g"],
                       actions={"cheap": (["s"], [(1, ["g"], ["s"])], 1),
                                "dear": (["s"], [(1, ["g"], ["s"])], 3)},
                       init=["s"], goal=["g"])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(heuristic="hmax")
    assert TrainConfig(explore_total=25).explore_per_problem(4) == 7


def test_trivial_problem_learned():
    t = _two_costs()
    w, rep = train(t.domain, [t], TrainConfig(max_epochs=5, time_limit=60, seed=1))
    trainer = Trainer(t.domain, [t], TrainConfig(), weights=w)
    p = trainer.pnets[0].probs(t.init)
    assert p[0] > 0.99
    assert len(rep.epochs) <= 5


def test_zero_time_limit_returns_initial_weights():
    d, tasks = _gen("cosanostra", [1])
    cfg = TrainConfig(time_limit=0, seed=3)
    init = Trainer(d, tasks, cfg).weights.flat()
    w, rep = train(d, tasks, cfg)
    assert rep.epochs == [] and rep.stop_reason == "time limit"
    assert np.array_equal(w.flat(), init)


def test_memory_monotone():
    d, tasks = _gen("cosanostra", [1, 2])
    _, rep = train(d, tasks, TrainConfig(max_epochs=3, train_batches=5, seed=0))
    sizes = [e.memory for e in rep.epochs]
    assert sizes == sorted(sizes) and sizes[0] > 0


def test_learn_before_explore_raises():
    d, tasks = _gen("cosanostra", [1])
    with pytest.raises(EmptyMemory):
        Trainer(d, tasks, TrainConfig()).learn_epoch(1)


def test_single_state_loss_decreases():
    t = _two_costs()
    tr = Trainer(t.domain, [t], TrainConfig(train_batches=20, batch_size=256, dropout=0.0))
    tr.explore_epoch(1)
    assert len(tr.memories[0]) == 1
    losses = [tr.learn_epoch(e) for e in range(1, 6)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_batch_gradient_is_sum_over_problems():
    d, tasks = _gen("cosanostra", [1, 2])
    cfg = TrainConfig(dropout=0.0, l2=1e-3)
    tr = Trainer(d, tasks, cfg)
    tr.explore_epoch(1)
    sizes = [len(m) for m in tr.memories]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    pick = np.array([0, 1, 1, offsets[1], offsets[1] + 2, offsets[2] - 1])
    loss, grads = tr.batch_loss_and_grad(pick, offsets, np.random.default_rng(0))
    ref, ref_loss = {}, 0.0
    for i, mem in enumerate(tr.memories):
        sel = pick[(pick >= offsets[i]) & (pick < offsets[i + 1])] - offsets[i]
        x, y = mem.arrays()
        _, dl, g = tr.pnets[i].net.loss_and_grad(x.take(sel), y[sel])
        ref_loss += dl
        add_grads(ref, g)
    assert loss == pytest.approx(ref_loss)
    for k, W in tr.weights.W.items():
        assert np.allclose(grads[("W", k)], ref[("W", k)] + 2 * cfg.l2 * W)
        assert np.allclose(grads[("b", k)], ref[("b", k)])


def test_train_and_eval_reproducible():
    d, tasks = _gen("cosanostra", [1, 2])
    cfg = TrainConfig(max_epochs=2, train_batches=10, seed=5)
    w1, _ = train(d, tasks, cfg)
    w2, _ = train(d, tasks, cfg)
    assert np.array_equal(w1.flat(), w2.flat())
    big = ground(d, parse_problem(generate("cosanostra", 4)[1], d))
    r1, r2 = evaluate(w1, big, 10, seed=9), evaluate(w2, big, 10, seed=9)
    assert r1.line() == r2.line()


def test_ttw1_memory_covers_teacher_envelope():
    d, tasks = _gen("ttw", [1])
    tr = Trainer(d, tasks, TrainConfig(seed=0))
    tr.explore_epoch(1)
    teacher, mem = tr.teachers[0], tr.memories[0]
    for s in teacher.envelope(tasks[0].init):
        if not is_terminal(tasks[0], s):
            assert s in mem
