import math

import numpy as np
import pytest

from fixedsr.evaluation import Dataset
from fixedsr.expr import depth_of, parse_expression
from fixedsr.search import ALGORITHMS, SearchConfig, crossover, mutate, read_trace_csv, run_search
from fixedsr.search.base import Run
from fixedsr.search.gp import Individual, gp_search, select_top
from fixedsr.search.mcts import SQRT2, MctsTable, next_exploration, uct_select
from fixedsr.search.pso import Particle, Swarm, round_half_away, token_index, velocity
from fixedsr.search.sa import (acceptance_probability, clamp, cooling_ratio, epoch_temperature,
                               sa_search)
from fixedsr.tokens import TokenTable

T2 = TokenTable(("cos",), ("+", "*"), 2, True)


@pytest.fixture
def toy():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(15, 2))
    return Dataset(X, X[:, 0] + X[:, 1])


def cfg(**kw):
    base = dict(time_budget=None, max_iterations=300, sample_interval=50, n_iter=40, population=20)
    base.update(kw)
    return SearchConfig(**base)


# -- shared contract ------------------------------------------------------------

@pytest.mark.parametrize("algorithm", ALGORITHMS)
@pytest.mark.parametrize("notation", ["prefix", "postfix"])
def test_traces_are_monotone_and_complete(algorithm, notation, toy):
    trace = run_search(cfg(algorithm=algorithm, notation=notation, depth=2), T2, toy)
    mses = [m for _, m in trace.samples]
    assert len(trace.samples) == 6
    assert [t for t, _ in trace.samples] == [50.0 * i for i in range(1, 7)]
    assert all(a >= b for a, b in zip(mses, mses[1:]))
    assert trace.iterations == 300
    assert depth_of(trace.best_expression) == (2, True)
    assert trace.best_score == pytest.approx(1.0 / (1.0 + trace.best_mse))
    assert mses[-1] == trace.best_mse


def test_random_search_recovers_depth_one_target(toy):
    trace = run_search(cfg(algorithm="random", depth=1), T2, toy)
    assert trace.best_mse < 1e-20


def test_random_search_depth_zero():
    t = TokenTable((), (), 1, False)
    ds = Dataset(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]))
    trace = run_search(cfg(algorithm="random", depth=0, max_iterations=1, sample_interval=1), t, ds)
    assert trace.best_mse == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(algorithm="nope")
    with pytest.raises(ValueError):
        SearchConfig(time_budget=None, max_iterations=None)
    with pytest.raises(ValueError):
        SearchConfig(sample_interval=0)
    with pytest.raises(ValueError):
        SearchConfig(n_iter=0)


def test_trace_csv_round_trip(toy, tmp_path):
    trace = run_search(cfg(algorithm="sa", depth=2), T2, toy)
    path = tmp_path / "t.csv"
    path.write_text(trace.to_csv("r0"))
    back = read_trace_csv(path)
    assert back["samples"] == trace.samples
    assert float(back["final"]["best_mse"]) == trace.best_mse
    assert back["final"]["expression"] == str(trace.best_expression)


def test_every_evaluated_expression_has_exact_depth(toy, monkeypatch):
    seen = []
    original = Run.evaluate

    def spy(self, seq):
        res = original(self, seq)
        seen.append(seq)
        return res

    monkeypatch.setattr(Run, "evaluate", spy)
    for algorithm in ALGORITHMS:
        run_search(cfg(algorithm=algorithm, depth=3, max_iterations=150), T2, toy)
    assert len(seen) == 5 * 150
    assert all(depth_of(s) == (3, True) for s in seen)


# -- MCTS -----------------------------------------------------------------------

def test_uct_prefers_unexplored_arm():
    # Q equal, N(s,a) = (10, 1), N(s) = 11
    assert uct_select([7, 8], [0.5, 0.5], [10, 1], 11, SQRT2) == 8


def test_uct_matches_direct_arithmetic():
    rng = np.random.default_rng(0)
    for _ in range(500):
        k = int(rng.integers(1, 6))
        q = rng.uniform(0, 1, size=k).tolist()
        n = rng.integers(1, 30, size=k).tolist()
        ns = sum(n)
        c = SQRT2 * int(rng.integers(1, 4))
        values = [q[i] + c * math.sqrt(math.log(ns) / n[i]) for i in range(k)]
        assert uct_select(list(range(k)), q, n, ns, c) == int(np.argmax(values))


def test_first_unvisited_action_then_uct():
    table = MctsTable()
    s = ()
    assert table.select(s, [3, 4, 5]) == 3
    table.backup([(s, 3)], 0.2)
    assert table.select(s, [3, 4, 5]) == 4
    table.backup([(s, 4)], 0.9)
    table.backup([(s, 5)], 0.1)
    assert table.select(s, [3, 4, 5]) == 4


def test_q_max_update():
    table = MctsTable()
    key = ((), 1)
    table.q[key] = 0.3
    table.backup([key], 0.5)
    assert table.q[key] == 0.5
    table.backup([key], 0.2)
    assert table.q[key] == 0.5
    assert table.n_action[key] == 2 and table.n_state[()] == 2


def test_exploration_schedule():
    c = SQRT2
    seq = []
    for _ in range(3):
        c = next_exploration(c, improved=False)
        seq.append(c)
    assert seq == pytest.approx([2 * SQRT2, 3 * SQRT2, 4 * SQRT2])
    assert next_exploration(seq[-1], improved=True) == SQRT2


# -- PSO ------------------------------------------------------------------------

@pytest.mark.parametrize("x,expected", [(5.4, 5), (5.5, 6), (-0.5, -1), (-1.4, -1), (0.49, 0), (2.5, 3)])
def test_round_half_away(x, expected):
    assert round_half_away(x) == expected


def test_token_index():
    assert token_index(5.4, 3) == 2
    assert token_index(-0.6, 3) == 2
    for x in np.linspace(-20, 20, 301):
        assert 0 <= token_index(float(x), 4) < 4


def test_pure_inertia():
    v = 1.0
    for i in range(1, 6):
        v = velocity(v, 2.0, 2.0, 2.0, 0.3, 0.9, 0.0)
        assert v == pytest.approx(0.721 ** i)


def test_velocity_terms():
    v = velocity(0.5, 1.0, 3.0, -1.0, 0.25, 0.5, 0.1)
    assert v == pytest.approx(0.721 * 0.5 + 2.8 * 0.25 * 2.0 + 1.3 * 0.5 * (-2.0) + 0.1)


def test_particle_best_average_position():
    p = Particle(0.2, 0.0, 0.2, 0.2)
    p.record(0.2, 0.5)
    p.record(1.1, 0.9)
    assert p.best_avg_pos == 1.1
    p.record(0.9, 0.1)  # same rounded key: mean drops to 0.5
    assert p.best_avg == pytest.approx(0.5)
    p.record(3.0, 0.6)
    assert p.best_avg_pos == 3.0


def test_swarm_epoch_rule():
    swarm = Swarm(cfg(algorithm="pso"), np.random.default_rng(0))
    for m in range(1, 5):
        swarm.epoch(improved=False)
        assert abs(swarm.c) <= m
        assert swarm.m == m + 1
    swarm.epoch(improved=True)
    assert swarm.c == 0.0 and swarm.m == 1


def test_particles_spawn_in_range():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = Particle.spawn(rng)
        assert 0 <= p.pos < 1 and -1 <= p.vel < 1


# -- GP -------------------------------------------------------------------------

def test_mutate_depth_zero_swaps_one_leaf():
    seq = parse_expression("+ x1 x2", "prefix", T2)
    rng = np.random.default_rng(0)
    for _ in range(100):
        out = mutate(seq, rng, n=0)
        assert out.tokens[0] == seq.tokens[0]
        assert sum(a != b for a, b in zip(out.tokens, seq.tokens)) <= 1


def test_crossover_leaf_multiset_preserved():
    a = parse_expression("+ x1 cos x2", "prefix", T2)
    b = parse_expression("* const cos const", "prefix", T2)
    rng = np.random.default_rng(1)
    for _ in range(100):
        c1, c2 = crossover(a, b, rng, n=0)
        assert sorted(c1.tokens + c2.tokens) == sorted(a.tokens + b.tokens)
        assert depth_of(c1) == depth_of(c2) == (2, True)


def test_crossover_identical_pieces():
    a = parse_expression("+ x1 x1", "prefix", T2)
    c1, c2 = crossover(a, a, np.random.default_rng(2), n=0)
    assert c1 == a and c2 == a


def test_select_top_matches_sort_oracle():
    rng = np.random.default_rng(3)
    seq = parse_expression("x1", "prefix", T2)
    pool = [Individual(seq, np.empty(0), float(s)) for s in rng.integers(0, 5, size=60) / 5]
    top = select_top(pool, 25)
    order = sorted(range(60), key=lambda i: (-pool[i].score, i))[:25]
    assert [id(x) for x in top] == [id(pool[i]) for i in order]


def test_gp_generations(toy):
    gens = []
    gp_search(cfg(algorithm="gp", depth=3, max_iterations=400), T2, toy,
              observer=lambda p, o, s: gens.append((p, o, s)))
    assert gens
    best = -1.0
    for parents, offspring, survivors in gens:
        assert 20 <= len(offspring) <= 21
        assert len(survivors) == 20
        merged = sorted((x.score for x in parents + offspring), reverse=True)[:20]
        assert [x.score for x in survivors] == merged
        assert all(depth_of(x.seq) == (3, True) for x in survivors)
        assert survivors[0].score >= best
        best = survivors[0].score


def test_gp_population_of_one(toy):
    trace = run_search(cfg(algorithm="gp", depth=2, population=1, max_iterations=50), T2, toy)
    assert trace.iterations == 50


# -- SA -------------------------------------------------------------------------

def test_acceptance_probability():
    assert acceptance_probability(0.0, 0.05) == 1.0
    assert acceptance_probability(0.2, 0.05) == 1.0
    assert acceptance_probability(-0.1, 0.1) == pytest.approx(math.exp(-1))


def test_cooling_and_clamp():
    assert cooling_ratio(0, 0.012, 0.1) == pytest.approx(0.12)
    assert cooling_ratio(9, 0.012, 0.1) == pytest.approx(0.12 ** 0.1)
    assert clamp(0.5, 0.012, 0.1) == 0.1
    assert clamp(0.001, 0.012, 0.1) == 0.012
    assert epoch_temperature(0.05, False, 0.012, 0.1) == 0.1
    assert epoch_temperature(0.05, True, 0.012, 0.1) == 0.012
    assert epoch_temperature(0.1, True, 0.012, 0.1) == pytest.approx(0.012)


def test_sa_temperature_stays_in_range(toy):
    temps = []
    sa_search(cfg(algorithm="sa", depth=2, max_iterations=500, n_iter=25), T2, toy,
              observer=lambda i, t: temps.append(t))
    assert len(temps) >= 490
    assert all(0.012 <= t <= 0.1 for t in temps)
