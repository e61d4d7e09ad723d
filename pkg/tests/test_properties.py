import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ebayes import io
from ebayes.classic import james_stein, pi0_from_max, ufdr_curve
from ebayes.fmodel import pseudo_inverse, theorem1_accuracy, theorem3_accuracy, uvw_vectors
from ebayes.gmodel import (
    GModelSpec,
    g_covariance,
    log_likelihood_and_score,
    prior_from_alpha,
)
from ebayes.grid import (
    make_grid,
    make_uv,
    marginal,
    normal_sampling_matrix,
    posterior_distribution,
    posterior_expectation,
)
from ebayes.poisson import delta_covariance, fit_poisson_glm
from ebayes.splines import natural_spline_basis

THETA = make_grid(-2, 2, 0.25)
X = make_grid(-4, 4, 0.2)
P = normal_sampling_matrix(THETA, X)
m, n = THETA.size, X.size

weights = arrays(np.float64, m, elements=st.floats(0.01, 10.0))
params = arrays(np.float64, m, elements=st.floats(-5.0, 5.0))
rows = st.integers(0, n - 1)
fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def prior(w):
    return w / w.sum()


@fast
@given(weights, rows)
def test_marginal_and_posterior_are_distributions(w, i):
    g = prior(w)
    f = marginal(P, g)
    assert abs(f.sum() - 1) < 1e-12 and f.min() >= 0
    post = posterior_distribution(P, g, i)
    assert abs(post.sum() - 1) < 1e-12 and post.min() >= 0


@fast
@given(weights, params, rows, st.floats(-100, 100))
def test_posterior_expectation_paths_and_constants(w, t, i, c):
    g = prior(w)
    e = posterior_expectation(P, g, t, i)
    assert abs(e - t @ posterior_distribution(P, g, i)) < 1e-12 * max(1, np.abs(t).max())
    assert abs(posterior_expectation(P, g, np.full(m, c), i) - c) < 1e-12 * max(1, abs(c))


@fast
@given(weights, params)
def test_law_of_total_expectation(w, t):
    g = prior(w)
    f = P @ g
    total = sum(f[i] * posterior_expectation(P, g, t, i) for i in range(n))
    assert abs(total - g @ t) < 1e-10


@fast
@given(weights, params, rows, st.integers(2, 9))
def test_W_centered_and_projection_shrinks_cv(w, t, i, rank):
    g = prior(w)
    f = P @ g
    u, v = make_uv(P, t, i)
    if abs(u @ g) < 1e-6 * np.abs(u).sum() * g.max():
        return
    pinv = pseudo_inverse(P, rank)
    try:
        uvw = uvw_vectors(pinv, u, v, f)
    except ArithmeticError:
        return
    scale = np.sqrt(f @ uvw.W**2)
    assert abs(f @ uvw.W) <= 1e-9 * max(scale, 1.0)
    X5 = natural_spline_basis(X, 5, intercept=True).X
    assert theorem3_accuracy(uvw, X5, f).cv <= theorem1_accuracy(uvw, f).cv * (1 + 1e-10) + 1e-12
    R = pinv.projector
    assert np.abs(R @ R - R).max() < 1e-10


@fast
@given(weights)
def test_full_rank_round_trip(w):
    g = prior(w)
    small = normal_sampling_matrix(THETA[::4], X)
    gg = prior(w[: small.shape[1]])
    np.testing.assert_allclose(pseudo_inverse(small, small.shape[1]).A @ (small @ gg), gg,
                               atol=1e-8)


@fast
@given(arrays(np.float64, 4, elements=st.floats(-20, 20)))
def test_g_model_prior_and_covariance_invariants(alpha):
    spec = GModelSpec(THETA, P, natural_spline_basis(THETA, 4).X)
    g = prior_from_alpha(spec, alpha)
    assert g.min() >= 0 and abs(g.sum() - 1) < 1e-12
    if g.min() > 1e-8:
        cov = g_covariance(spec, alpha, 100)
        assert np.abs(cov.sum(axis=1)).max() < 1e-8 * max(1.0, np.abs(cov).max())
        assert np.linalg.eigvalsh(cov).min() > -1e-10 * max(1.0, np.abs(cov).max())


@fast
@given(arrays(np.float64, 3, elements=st.floats(-2, 2)),
       arrays(np.int64, n, elements=st.integers(0, 50)))
def test_score_matches_finite_differences(alpha, y):
    if y.sum() == 0:
        return
    spec = GModelSpec(THETA, P, natural_spline_basis(THETA, 3).X)
    _, score = log_likelihood_and_score(spec, alpha, y)
    h = 1e-6
    num = np.array([(log_likelihood_and_score(spec, alpha + h * e, y)[0]
                     - log_likelihood_and_score(spec, alpha - h * e, y)[0]) / (2 * h)
                    for e in np.eye(3)])
    assert np.linalg.norm(score - num) <= 1e-5 * max(np.linalg.norm(score), 1e-2 * y.sum())


@fast
@given(arrays(np.int64, n, elements=st.integers(1, 200)))
def test_poisson_fit_invariants(y):
    fit = fit_poisson_glm(y, natural_spline_basis(X, 4, intercept=True).X)
    assert fit.fhat.min() > 0 and abs(fit.fhat.sum() - 1) < 1e-12
    D = delta_covariance(fit)
    assert np.abs(D.sum(axis=1)).max() < 1e-8
    assert np.linalg.eigvalsh(D).min() > -1e-12
    trace = np.array(fit.loglik_trace)
    assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1]))
    ufdr = ufdr_curve(fit, X)
    _, scaled = pi0_from_max(ufdr)
    assert scaled.values.max() <= 1 + 1e-12 and ufdr.values.min() >= 0


@fast
@given(arrays(np.float64, st.integers(4, 30), elements=st.floats(-50, 50), unique=True),
       st.floats(-1e3, 1e3))
def test_james_stein_translation_equivariance(v, c):
    np.testing.assert_allclose(james_stein(v + c), james_stein(v) + c, atol=1e-8 * (1 + abs(c)))


@fast
@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-1e6, 1e6)))
def test_z_value_files_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("z") / "z.txt"
    io.write_grid(path, values)
    np.testing.assert_array_equal(io.read_zvalues(path), values)
