"""Particle swarm over token choices.

Particle ``i`` owns step ``i`` of the expression. Its position, rounded half
away from zero and reduced modulo the number of legal tokens, picks the token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..evaluation import Dataset
from ..grammar import GrammarState
from ..tokens import TokenTable
from .base import Run, RunTrace, SearchConfig, StopSearch


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def token_index(position: float, n_legal: int) -> int:
    return round_half_away(position) % n_legal


def velocity(v, pos, best_expr_pos, best_avg_pos, r_g, r_p, c,
             inertia=0.721, phi1=2.8, phi2=1.3) -> float:
    return (inertia * v + phi1 * r_g * (best_expr_pos - pos)
            + phi2 * r_p * (best_avg_pos - pos) + c)


@dataclass
class Particle:
    pos: float
    vel: float
    best_expr_pos: float
    best_avg_pos: float
    # rounded position -> [score sum, count, last real position]
    stats: dict = field(default_factory=dict)
    best_avg: float = -math.inf

    @classmethod
    def spawn(cls, rng) -> "Particle":
        pos = float(rng.uniform(0.0, 1.0))
        vel = float(rng.uniform(-1.0, 1.0))
        return cls(pos, vel, pos, pos)

    def record(self, used_pos: float, score: float) -> None:
        key = round_half_away(used_pos)
        entry = self.stats.get(key)
        if entry is None:
            entry = self.stats[key] = [0.0, 0, used_pos]
        entry[0] += score
        entry[1] += 1
        entry[2] = used_pos
        # refresh from scratch: means of other keys are unchanged but this
        # key's mean may have dropped
        best_key, best_mean = None, -math.inf
        for k, (s, n, _) in self.stats.items():
            m = s / n
            if m > best_mean:
                best_key, best_mean = k, m
        self.best_avg = best_mean
        self.best_avg_pos = self.stats[best_key][2]


class Swarm:
    def __init__(self, cfg: SearchConfig, rng):
        self.cfg = cfg
        self.rng = rng
        self.particles: list[Particle] = []
        self.c = 0.0
        self.m = 1

    def particle(self, i: int) -> Particle:
        while len(self.particles) <= i:
            self.particles.append(Particle.spawn(self.rng))
        return self.particles[i]

    def build(self, root: GrammarState):
        """Walk the grammar once; returns the final state and positions used."""
        cfg, rng = self.cfg, self.rng
        state = root
        used = []
        i = 0
        while not state.is_done:
            legal = state.legal_tokens()
            p = self.particle(i)
            tok = legal[token_index(p.pos, len(legal))]
            used.append(p.pos)
            r_g, r_p = rng.random(), rng.random()
            p.vel = velocity(p.vel, p.pos, p.best_expr_pos, p.best_avg_pos, r_g, r_p,
                             self.c, cfg.inertia, cfg.phi1, cfg.phi2)
            p.pos += p.vel
            state = state.step(tok)
            i += 1
        return state, used

    def update(self, used: list[float], score: float, new_best: bool) -> None:
        for i, pos in enumerate(used):
            p = self.particles[i]
            if new_best:
                p.best_expr_pos = pos
            p.record(pos, score)

    def epoch(self, improved: bool) -> None:
        if improved:
            self.c = 0.0
            self.m = 1
        else:
            self.c = float(self.rng.uniform(-self.m, self.m))
            self.m += 1


def pso_search(cfg: SearchConfig, table: TokenTable, data: Dataset) -> RunTrace:
    run = Run(cfg, table, data)
    swarm = Swarm(cfg, run.rng)
    root = GrammarState.initial(cfg.notation, cfg.depth, table)
    try:
        while True:
            state, used = swarm.build(root)
            before = run.best_score
            had_best = run.trace.best_expression is not None
            res = run.evaluate(state.to_seq())
            swarm.update(used, res.score, res.score > before or not had_best)
            if run.epoch_due():
                swarm.epoch(run.epoch_improved())
    except StopSearch:
        pass
    return run.finish()
