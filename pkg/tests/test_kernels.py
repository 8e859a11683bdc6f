import numpy as np
import pytest

from lacuna import kernels
from lacuna.geometry import make_direction

needs_compiled = pytest.mark.skipif(kernels._ckernels is None, reason="compiled kernels not built")


def _segment_oracle(f, v, radii):
    """Direct quadrature: bilinear interpolation at each node, plain loops."""
    M = f.shape[0]
    out = np.zeros_like(f)
    for x in np.ndindex(f.shape):
        best = 0.0
        for s in radii:
            h = min(s / 16, 1.0)
            k = int(round(s / h))
            acc = 0.0
            for i in range(-k, k + 1):
                p = np.array(x, float) + i * h * v
                base = np.floor(p).astype(int)
                w = p - base
                val = 0.0
                for corner in np.ndindex(*(2,) * f.ndim):
                    c = np.array(corner)
                    weight = np.prod(np.where(c == 1, w, 1 - w))
                    val += weight * f[tuple((base + c) % M)]
                acc += val * (0.5 if abs(i) == k else 1.0)
            best = max(best, acc / (2 * k))
        out[x] = best
    return out


def _strong_oracle(f):
    M = f.shape[0]
    sides = [1 << a for a in range(M.bit_length())]
    out = np.zeros_like(f)
    for a in sides:
        for b in sides:
            for i in range(M):
                for j in range(M):
                    avg = np.mean(f[np.ix_([(i + r) % M for r in range(a)], [(j + c) % M for c in range(b)])])
                    for r in range(a):
                        for c in range(b):
                            x = ((i + r) % M, (j + c) % M)
                            out[x] = max(out[x], avg)
    return out


def test_segment_max_matches_direct_quadrature(rng):
    f = rng.random((8, 8))
    v = make_direction((1, 0.37))
    radii = [0.5, 1.0, 2.0, 4.0]
    assert np.allclose(kernels.segment_max_numpy(f, v, radii), _segment_oracle(f, v, radii), atol=1e-13)


def test_strong_maximal_matches_enumeration(rng):
    f = rng.random((8, 8))
    assert np.allclose(kernels.strong_maximal_numpy(f), _strong_oracle(f), atol=1e-13)


@needs_compiled
@pytest.mark.parametrize("shape", [(16, 16), (8, 8, 8), (8, 8, 8, 8)])
def test_backends_agree_segment(rng, shape):
    f = rng.random(shape)
    V = rng.uniform(0.1, 1, len(shape))
    v = V / np.linalg.norm(V)
    radii = [0.25, 1.0, 2.0, 4.0, 8.0]
    a = kernels.segment_max_numpy(f, v, radii)
    b = kernels._ckernels.segment_max(f, v, [(h, [e[0] for e in es]) for h, es in kernels.radius_groups(radii)])
    assert np.allclose(a, b, rtol=1e-13, atol=1e-14)


@needs_compiled
@pytest.mark.parametrize("shape", [(32, 32), (8, 8, 8), (8, 8, 8, 8)])
def test_backends_agree_strong(rng, shape):
    f = rng.random(shape)
    assert np.allclose(kernels.strong_maximal_numpy(f), kernels._ckernels.strong_maximal(f),
                       rtol=1e-13, atol=1e-14)


def test_radius_groups():
    groups = kernels.radius_groups([0.5, 1, 16, 32])
    assert groups[0][0] == pytest.approx(0.5 / 16)
    assert groups[-1] == (1.0, [(16, 16.0), (32, 32.0)])
    with pytest.raises(ValueError):
        kernels.radius_groups([0.0])
    with pytest.raises(ValueError):
        kernels.radius_groups([16.5])


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "numpy")


def test_pure_fallback_is_selected_by_env():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "from lacuna import kernels; print(kernels.BACKEND)"],
                         env={"LACUNA_PURE": "1", "PATH": ""}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
