"""Ground-truthed data generator: regime-switching block-diagonal VAR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tsdata import Dataset

BURN_IN = 200  # per-block discarded samples, started from zero


@dataclass
class SimScenario:
    """Configuration of the switching block-VAR benchmark generator.

    Regime j's coefficient matrix is block-diagonal with dense
    block_size x block_size diagonal blocks drawn i.i.d. from
    U[-coeff_ranges[j], coeff_ranges[j]] and redrawn until stable. Blocks of
    block_length samples cycle through the regimes 1, 2, ..., K, 1, ...;
    each block is simulated independently with its own burn-in.
    """

    N: int
    K: int = 2
    P: int = 1
    block_size: int = 10
    coeff_ranges: list[float] = field(default_factory=lambda: [0.4, 0.2])
    noise_var: float = 0.5
    block_length: int = 50
    n_blocks: int = 4
    seed: int | None = None

    def __post_init__(self):
        if self.N % self.block_size != 0:
            raise ValueError(f"N={self.N} not divisible by block_size={self.block_size}")
        if len(self.coeff_ranges) != self.K:
            raise ValueError(f"need {self.K} coeff ranges, got {len(self.coeff_ranges)}")
        if any(c < 0 for c in self.coeff_ranges):
            raise ValueError("coeff ranges must be nonnegative")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be > 0")
        if self.block_length < self.P + 1:
            raise ValueError("block_length must be >= P+1")


@dataclass
class GroundTruth:
    """True per-regime coefficients, state path, and change points."""

    coeff_matrices: np.ndarray  # (K, N, N)
    state_sequence: np.ndarray  # (T,) values in 1..K
    change_points: list[int]  # 1-based times t where S_{t+1} != S_t


def gen_block_var_coeffs(
    N: int, block_size: int, range_limit: float, rng, max_tries: int = 1000
) -> np.ndarray:
    """Draw a stable block-diagonal VAR(1) coefficient matrix.

    Diagonal block_size x block_size blocks are filled i.i.d.
    U[-range_limit, range_limit]; off-block entries are exactly zero. The
    whole matrix is redrawn until its spectral radius is < 1.
    """
    if N % block_size != 0:
        raise ValueError(f"N={N} not divisible by block_size={block_size}")
    if range_limit < 0:
        raise ValueError("range_limit must be nonnegative")
    n_blocks = N // block_size
    for _ in range(max_tries):
        A = np.zeros((N, N))
        for b in range(n_blocks):
            s = b * block_size
            A[s : s + block_size, s : s + block_size] = rng.uniform(
                -range_limit, range_limit, size=(block_size, block_size)
            )
        if np.max(np.abs(np.linalg.eigvals(A))) < 1.0:
            return A
    raise RuntimeError(f"no stable draw in {max_tries} tries at range {range_limit}")


def simulate_switching_var(s: SimScenario) -> tuple[Dataset, GroundTruth]:
    """Simulate the cyclic-regime benchmark scenario.

    Each regime block of block_length samples is an independent run of that
    regime's VAR(1) with N(0, noise_var * I) innovations, burn-in discarded.
    Ground-truth change points sit at the multiples of block_length where
    the active state actually changes.
    """
    if s.P != 1:
        raise ValueError("only first-order scenarios are supported")
    rng = np.random.default_rng(s.seed)
    coeffs = np.stack(
        [gen_block_var_coeffs(s.N, s.block_size, c, rng) for c in s.coeff_ranges]
    )
    T = s.n_blocks * s.block_length
    values = np.empty((T, s.N))
    states = np.empty(T, dtype=np.int64)
    sd = np.sqrt(s.noise_var)
    for b in range(s.n_blocks):
        j = b % s.K
        A = coeffs[j]
        eta = rng.standard_normal((BURN_IN + s.block_length, s.N)) * sd
        x = np.zeros(s.N)
        for t in range(BURN_IN + s.block_length):
            x = A @ x + eta[t]
            if t >= BURN_IN:
                values[b * s.block_length + t - BURN_IN] = x
        states[b * s.block_length : (b + 1) * s.block_length] = j + 1
    change_points = [
        b * s.block_length
        for b in range(1, s.n_blocks)
        if (b % s.K) != ((b - 1) % s.K)
    ]
    d = Dataset(values=values, channel_names=[f"ch{i + 1}" for i in range(s.N)])
    truth = GroundTruth(
        coeff_matrices=coeffs, state_sequence=states, change_points=change_points
    )
    return d, truth
