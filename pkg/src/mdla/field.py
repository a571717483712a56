"""Lazily materialized Poisson initial configuration on Z^d."""

from dataclasses import dataclass
from itertools import product

import numpy as np
from numba import njit

from .rng import TAG_PATH, TAG_SITE, TAG_THIN, derive_key, draw, poisson_inverse, to_unit

DEFAULT_SITE_BUDGET = 10_000_000


class SiteBudgetError(ValueError):
    """A requested window exceeds the configured site budget."""


@dataclass(frozen=True)
class FieldConfig:
    k_density: float
    master_seed: int
    dimension: int = 1

    def __post_init__(self):
        if not np.isfinite(self.k_density) or self.k_density < 0:
            raise ValueError(f"k_density must be finite and >= 0, got {self.k_density}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")

    @property
    def seed(self) -> np.uint64:
        return np.uint64(self.master_seed % 2**64)


@dataclass(frozen=True)
class SiteOccupancy:
    site: tuple
    count: int
    particle_ids: tuple

    def __post_init__(self):
        if self.count != len(self.particle_ids):
            raise ValueError("count must equal the number of particle ids")


@njit(cache=True)
def count_at(seed, coords, k_density):
    h = draw(derive_key(seed, TAG_SITE, coords, 0), 0)
    return poisson_inverse(to_unit(h), k_density)


@njit(cache=True)
def path_key(seed, coords, index):
    return derive_key(seed, TAG_PATH, coords, index)


@njit(cache=True)
def thinning_mark(seed, coords, index):
    """Uniform mark used to thin the field to a lower density."""
    return to_unit(draw(derive_key(seed, TAG_THIN, coords, index), 0))


@njit(cache=True)
def _box_counts(seed, lo, shape, k_density):
    n = 1
    for s in shape:
        n *= s
    d = lo.shape[0]
    out = np.empty(n, dtype=np.int64)
    coords = np.empty(d, dtype=np.int64)
    for flat in range(n):
        r = flat
        for i in range(d - 1, -1, -1):
            coords[i] = lo[i] + r % shape[i]
            r //= shape[i]
        out[flat] = count_at(seed, coords, k_density)
    return out


def _as_site(site, dimension):
    t = tuple(int(c) for c in np.atleast_1d(site))
    if len(t) != dimension:
        raise ValueError(f"site {site} does not have dimension {dimension}")
    return t


def site_count(config: FieldConfig, site) -> SiteOccupancy:
    """Occupation of one site; particle ids are (site, index) pairs."""
    s = _as_site(site, config.dimension)
    c = int(count_at(config.seed, np.array(s, dtype=np.int64), float(config.k_density)))
    return SiteOccupancy(site=s, count=c, particle_ids=tuple((s, i) for i in range(c)))


def window_counts(config: FieldConfig, lo, hi, site_budget: int = DEFAULT_SITE_BUDGET) -> np.ndarray:
    """Counts on the box [lo, hi] as a d-dimensional array (C order)."""
    lo_t = np.array(_as_site(lo, config.dimension), dtype=np.int64)
    hi_t = np.array(_as_site(hi, config.dimension), dtype=np.int64)
    shape = np.maximum(hi_t - lo_t + 1, 0)
    n_sites = int(np.prod(shape, dtype=object))
    if n_sites > site_budget:
        raise SiteBudgetError(f"window has {n_sites} sites, budget is {site_budget}")
    if n_sites == 0:
        return np.zeros(tuple(shape), dtype=np.int64)
    counts = _box_counts(config.seed, lo_t, shape.astype(np.int64), float(config.k_density))
    return counts.reshape(tuple(shape))


def materialize_window(config: FieldConfig, lo, hi, site_budget: int = DEFAULT_SITE_BUDGET) -> list:
    """Occupancies of every site in [lo, hi], in lexicographic order."""
    counts = window_counts(config, lo, hi, site_budget)
    if counts.size == 0:
        return []
    lo_t = _as_site(lo, config.dimension)
    ranges = [range(a, a + n) for a, n in zip(lo_t, counts.shape)]
    out = []
    for site, c in zip(product(*ranges), counts.ravel()):
        c = int(c)
        out.append(SiteOccupancy(site=site, count=c, particle_ids=tuple((site, i) for i in range(c))))
    return out
