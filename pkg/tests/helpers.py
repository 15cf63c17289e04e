import numpy as np

from krylov_qfi.ensembles import random_fullrank, random_rank_r
from krylov_qfi.qcore import DensityMatrix, build_transition_table, collective_z


def analyzed(rho, H):
    state = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    spec = state.spectrum
    return state, spec, build_transition_table(spec, H)


def random_states(kind, dim, count, base_seed=0, rank=2):
    for i in range(count):
        seed = np.random.SeedSequence(base_seed, spawn_key=(i,))
        if kind == "fullrank":
            yield random_fullrank(dim, seed)
        else:
            yield random_rank_r(dim, rank, seed)


def zH(dim):
    return collective_z(int(np.log2(dim)))
