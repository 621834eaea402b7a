"""Monte Carlo bookkeeping: estimates, mergeable accumulators and seed derivation.

Per-sample seeds are a pure function of ``(master_seed, experiment_id, index)``
so a run is reproducible bit for bit however the samples are scheduled.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1


def experiment_key(experiment_id: str) -> int:
    """Stable 63-bit key for an experiment label."""
    digest = hashlib.blake2b(experiment_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


@njit(cache=True)
def splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def sample_seed64(master, key, index):
    h = splitmix64(np.uint64(master) ^ splitmix64(np.uint64(key)))
    return splitmix64(h ^ np.uint64(index))


# ---- per-sample stream: splitmix64 sequence, ziggurat normals (128 layers)


def _ziggurat_tables():
    m1 = 2.0 ** 31
    dn = tn = 3.442619855899
    vn = 9.91256303526217e-3
    kn = np.zeros(128, dtype=np.int64)
    wn = np.zeros(128)
    fn = np.zeros(128)
    q = vn / math.exp(-0.5 * dn * dn)
    kn[0] = int((dn / q) * m1)
    kn[1] = 0
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = math.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = int((dn / tn) * m1)
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


ZIG_K, ZIG_W, ZIG_F = _ziggurat_tables()
ZIG_R = 3.442619855899


@njit(cache=True)
def new_stream(seed):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    return state


# ``state`` is a uint64 array holding one stream per lane; ``j`` picks the lane.


@njit(cache=True)
def next_u64(state, j):
    state[j] = state[j] + np.uint64(0x9E3779B97F4A7C15)
    z = state[j]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def uniform(state, j):
    """Uniform on (0, 1)."""
    return (np.float64(next_u64(state, j) >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def normal(state, j):
    """Standard normal by the Marsaglia-Tsang ziggurat."""
    while True:
        r = next_u64(state, j)
        iz = np.int64(r & np.uint64(127))
        hz = np.int64(np.int32(np.uint32(r >> np.uint64(32))))
        if abs(hz) < ZIG_K[iz]:
            return hz * ZIG_W[iz]
        x = hz * ZIG_W[iz]
        if iz == 0:
            while True:
                x = -math.log(uniform(state, j)) / ZIG_R
                y = -math.log(uniform(state, j))
                if y + y >= x * x:
                    break
            return ZIG_R + x if hz > 0 else -ZIG_R - x
        if ZIG_F[iz] + uniform(state, j) * (ZIG_F[iz - 1] - ZIG_F[iz]) < math.exp(-0.5 * x * x):
            return x


def seed_for(master_seed: int, experiment_id: str, index: int) -> int:
    return int(sample_seed64(np.uint64(master_seed & MASK64),
                           np.uint64(experiment_key(experiment_id)),
                           np.uint64(index)))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_samples: int
    master_seed: int
    experiment_id: str

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n_samples,
                "master_seed": self.master_seed, "experiment_id": self.experiment_id}

    @classmethod
    def from_json(cls, data: dict) -> "McEstimate":
        return cls(float(data["mean"]), float(data["stderr"]), int(data["n"]),
                   int(data["master_seed"]), str(data["experiment_id"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def within(self, value: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.mean - value) <= max(k * self.stderr, floor)


@dataclass
class Accumulator:
    """Welford running moments; ``merge`` is associative."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def push_array(self, xs) -> None:
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return
        other = Accumulator(int(xs.size), float(xs.mean()),
                            float(((xs - xs.mean()) ** 2).sum()))
        merged = self.merge(other)
        self.n, self.mean, self.m2 = merged.n, merged.mean, merged.m2

    def merge(self, other: "Accumulator") -> "Accumulator":
        if self.n == 0:
            return Accumulator(other.n, other.mean, other.m2)
        if other.n == 0:
            return Accumulator(self.n, self.mean, self.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Accumulator(n, mean, m2)

    def estimate(self, master_seed: int, experiment_id: str) -> McEstimate:
        if self.n < 1:
            raise ValueError("no samples")
        # population variance: keeps stderr <= 1/(2 sqrt n) for 0/1 outcomes
        var = self.m2 / self.n
        return McEstimate(self.mean, math.sqrt(max(var, 0.0) / self.n), self.n,
                          master_seed, experiment_id)


def estimate_from_samples(values, master_seed: int, experiment_id: str) -> McEstimate:
    acc = Accumulator()
    acc.push_array(values)
    return acc.estimate(master_seed, experiment_id)
