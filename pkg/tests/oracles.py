"""Independent oracles for expected values.

Plain-numpy implementations kept deliberately separate from the package
code paths they check: entropies from first principles, brute-force grid
sweeps, and direct tensor contractions.
"""

import numpy as np


def h_bits(p: np.ndarray) -> float:
    """Entropy of a probability array by direct -sum(p log2 p)."""
    p = np.asarray(p, dtype=float).reshape(-1)
    p = p[p > 1e-15]
    return float(-(p * np.log2(p)).sum())


def h2(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def mi_from_joint(joint: np.ndarray) -> float:
    """I(rows; cols) of a 2-D joint by direct evaluation."""
    joint = np.asarray(joint, dtype=float)
    return h_bits(joint.sum(1)) + h_bits(joint.sum(0)) - h_bits(joint)


def wiretap_sum_rate_grid(p_y_given_x: np.ndarray, p_z_given_x: np.ndarray,
                          steps: int = 22) -> float:
    """Exhaustive grid sweep of [I(V1;Y) - I(V1;Z)]_+ over binary V1.

    Parameterizes p(V1=0) = w and the two rows of p(X|V1); about steps^3
    grid points (10^4 by default).
    """
    best = 0.0
    grid = np.linspace(0.0, 1.0, steps)
    for w in grid:
        law = np.array([w, 1.0 - w])
        for a in grid:
            for b in grid:
                x_given_v1 = np.array([[a, 1 - a], [b, 1 - b]])
                joint_vy = law[:, None] * (x_given_v1 @ p_y_given_x)
                joint_vz = law[:, None] * (x_given_v1 @ p_z_given_x)
                val = mi_from_joint(joint_vy) - mi_from_joint(joint_vz)
                best = max(best, val)
    return best


def contract_coupling(u1_given_sa, source, v2_law, v1_given_v2, x_given_v1,
                      channel_rows) -> np.ndarray:
    """Direct tensor contraction of the coupling factorization."""
    return np.einsum(
        "ga,ghi,c,cb,bd,def->abcdefghi",
        np.asarray(u1_given_sa, float),
        np.asarray(source, float),
        np.asarray(v2_law, float),
        np.asarray(v1_given_v2, float),
        np.asarray(x_given_v1, float),
        np.asarray(channel_rows, float),
    )


def bsc(p: float) -> np.ndarray:
    return np.array([[1 - p, p], [p, 1 - p]])


def random_stochastic(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.dirichlet(np.ones(cols), size=rows)
