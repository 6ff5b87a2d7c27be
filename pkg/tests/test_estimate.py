import numpy as np
import pytest

from poissonloc import (DetectorArray, DomainError, ParameterBox,
                        bayes_estimate, fisher_information, mle,
                        self_normalized_mean, simulate,
                        truncated_gaussian_prior)
from poissonloc.estimate import _best_rows, _lattice_points
from conftest import THETA0, default_box, five_detectors, make_model


def test_lattice_points_are_cell_centers(box):
    pts = _lattice_points(box, 3)
    assert pts.shape == (81, 4)
    assert np.allclose(pts[0], box.lower + box.span / 6.0)
    assert np.allclose(pts[-1], box.upper - box.span / 6.0)
    assert np.all((pts > box.lower) & (pts < box.upper))
    # lexicographic layout: last axis varies fastest
    assert np.allclose(pts[1] - pts[0], [0.0, 0.0, 0.0, box.span[3] / 3.0])


def test_best_rows_tie_break_lexicographic():
    points = np.array([[1.0, 0.0, 0.0, 0.0],
                       [0.0, 1.0, 0.0, 0.0],
                       [0.0, 0.0, 1.0, 0.0]])
    values = np.array([5.0, 5.0, 5.0])
    assert _best_rows(points, values, 3).tolist() == [2, 1, 0]
    values = np.array([5.0, 7.0, 5.0])
    assert _best_rows(points, values, 2).tolist() == [1, 2]


def test_mle_recovers_truth_smooth(smooth_obs, box, theta0):
    res = mle(smooth_obs, box, lattice=5, refine_starts=3)
    assert res.method == "mle"
    assert np.linalg.norm(res.values - theta0) < 0.05
    assert not res.boundary
    assert res.log_likelihood >= float(
        np.max([res.log_likelihood]))  # finite, self-consistent
    assert res.evaluations > 5 ** 4


def test_mle_recovers_truth_cusp(cusp_obs, box, theta0):
    # non-smooth regime exercises the Nelder-Mead path
    res = mle(cusp_obs, box, lattice=5, refine_starts=3, nm_restarts=2)
    assert np.linalg.norm(res.values - theta0) < 0.03
    assert res.iterations > 0


def test_mle_recovers_truth_change_point(cp_obs, box, theta0):
    res = mle(cp_obs, box, lattice=5, refine_starts=3, nm_restarts=2)
    assert np.linalg.norm(res.values - theta0) < 0.03


def test_mle_deterministic(cusp_obs, box):
    a = mle(cusp_obs, box, lattice=4, refine_starts=2)
    b = mle(cusp_obs, box, lattice=4, refine_starts=2)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.log_likelihood == b.log_likelihood


def test_mle_boundary_flag(smooth_obs, box, theta0):
    # truth excluded on the first axis: the maximizer lands on the edge
    upper = box.upper.copy()
    upper[0] = theta0[0] - 0.05
    squeezed = ParameterBox(box.lower, upper)
    res = mle(smooth_obs, squeezed, lattice=4, refine_starts=2)
    assert res.boundary
    assert abs(res.values[0] - upper[0]) < 1e-6


def test_self_normalized_mean_two_atoms():
    pts = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]])
    lw = np.log([1.0, 3.0])
    mean, w = self_normalized_mean(pts, lw)
    assert np.allclose(mean, 0.75, atol=1e-12)
    assert np.allclose(w, [0.25, 0.75], atol=1e-12)
    # invariance under a common log-weight shift
    mean2, _ = self_normalized_mean(pts, lw + 1234.5)
    assert np.allclose(mean, mean2, atol=1e-12)
    dead = np.array([-np.inf, 0.0])
    mean3, w3 = self_normalized_mean(pts, dead)
    assert np.allclose(mean3, pts[1])
    assert w3[0] == 0.0


def test_self_normalized_mean_rejects_degenerate():
    pts = np.zeros((2, 4))
    with pytest.raises(DomainError):
        self_normalized_mean(pts, np.array([-np.inf, -np.inf]))
    with pytest.raises(DomainError):
        self_normalized_mean(pts, np.zeros(3))


def test_truncated_gaussian_prior_shape():
    prior = truncated_gaussian_prior([0.0, 0.0, 1.0, 1.0], 0.5)
    x = np.array([[0.0, 0.0, 1.0, 1.0], [0.5, 0.0, 1.0, 1.0]])
    vals = prior(x)
    assert vals.shape == (2,)
    assert vals[0] == pytest.approx(1.0)
    assert vals[1] == pytest.approx(np.exp(-0.5))


@pytest.mark.parametrize("kappa,delta", [(1.0, 0.25), (0.25, 0.2), (0.0, 0.2)])
def test_bayes_estimate_close_and_healthy(array5, box, kappa, delta):
    model = make_model(kappa=kappa, n=500.0, delta=delta)
    obs = simulate(model, array5, THETA0, seed=2)
    res = bayes_estimate(obs, box, draws=3000, seed=5, lattice=5)
    assert res.method == "be"
    assert np.linalg.norm(res.values - THETA0) < 0.05
    assert res.ess >= 100.0
    assert 0.0 < res.posterior_mass <= 1.0
    assert res.warnings == ()


def test_bayes_deterministic(cusp_obs, box):
    a = bayes_estimate(cusp_obs, box, draws=1200, seed=3, lattice=4,
                       refine_starts=2, min_ess=20.0)
    b = bayes_estimate(cusp_obs, box, draws=1200, seed=3, lattice=4,
                       refine_starts=2, min_ess=20.0)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.ess == b.ess
    c = bayes_estimate(cusp_obs, box, draws=1200, seed=4, lattice=4,
                       refine_starts=2, min_ess=20.0)
    assert not np.array_equal(a.values, c.values)


def test_bayes_ess_doubling_and_warning(cp_obs, box):
    # a near-degenerate proposal: the sampler doubles the draw count, runs
    # out of attempts, and reports the shortfall instead of failing
    res = bayes_estimate(cp_obs, box, draws=400, seed=9, lattice=4,
                         refine_starts=2, scale_mult=1e-3, min_ess=5000.0,
                         max_attempts=2)
    assert res.attempts == 2
    assert res.ess < 5000.0
    assert len(res.warnings) == 1 and "ESS" in res.warnings[0]


def test_bayes_prior_pulls_posterior(array5, box):
    model = make_model(kappa=1.0, n=60.0)
    obs = simulate(model, array5, THETA0, seed=21)
    flat = bayes_estimate(obs, box, draws=4000, seed=1, lattice=4,
                          refine_starts=2, min_ess=50.0)
    center = np.asarray(THETA0) + [0.08, -0.08, -0.08, 0.08]
    tight = truncated_gaussian_prior(center, 0.01)
    pulled = bayes_estimate(obs, box, tight, draws=4000, seed=1, lattice=4,
                            refine_starts=2, min_ess=50.0)
    assert (np.linalg.norm(pulled.values - center)
            < np.linalg.norm(flat.values - center))


def test_bayes_rejects_bad_prior(cusp_obs, box):
    with pytest.raises(DomainError):
        bayes_estimate(cusp_obs, box, lambda t: -np.ones(len(t)), draws=500,
                       seed=0, lattice=4, refine_starts=2, min_ess=10.0)


def test_profile_scale_tracks_information(smooth_obs, box, array5, theta0):
    # in the smooth regime the proposal scale should sit within a small
    # factor of the asymptotic standard deviation sqrt([I^-1]_aa / n)
    from poissonloc.estimate import _profile_scale

    fim = fisher_information(smooth_obs.model, array5, theta0)
    asym = np.sqrt(np.diag(fim.inverse()) / smooth_obs.model.n)
    mode = mle(smooth_obs, box, lattice=4, refine_starts=2).values
    sigma, _ = _profile_scale(smooth_obs, box, mode,
                              smooth_obs.model.n ** -0.5)
    ratio = sigma / asym
    assert np.all(ratio > 0.2) and np.all(ratio < 5.0), ratio


def test_estimators_translation_equivariant(array5, box):
    # shifting detectors, box, and truth by the same exactly representable
    # offset shifts both estimates; the smooth path is equivariant to
    # machine precision, the simplex path to optimizer tolerance
    shift2 = np.array([0.25, -0.5])
    shift4 = np.array([0.25, -0.5, 0.25, -0.5])
    arr2 = DetectorArray(array5.positions + shift2, array5.nu)
    box2 = ParameterBox(box.lower + shift4, box.upper + shift4)
    t0 = np.asarray(THETA0)

    model = make_model(kappa=1.0, n=300.0)
    obs = simulate(model, array5, t0, seed=11)
    obs2 = simulate(model, arr2, t0 + shift4, seed=11)
    assert obs.counts().tolist() == obs2.counts().tolist()

    m1 = mle(obs, box, lattice=4, refine_starts=2)
    m2 = mle(obs2, box2, lattice=4, refine_starts=2)
    assert np.max(np.abs(m2.values - m1.values - shift4)) < 1e-12

    b1 = bayes_estimate(obs, box, draws=1500, seed=7, lattice=4,
                        refine_starts=2)
    b2 = bayes_estimate(obs2, box2, draws=1500, seed=7, lattice=4,
                        refine_starts=2)
    assert np.max(np.abs(b2.values - b1.values - shift4)) < 1e-10

    mc = make_model(kappa=0.25, n=300.0, delta=0.2)
    oc = simulate(mc, array5, t0, seed=12)
    oc2 = simulate(mc, arr2, t0 + shift4, seed=12)
    n1 = mle(oc, box, lattice=4, refine_starts=2, nm_restarts=2)
    n2 = mle(oc2, box2, lattice=4, refine_starts=2, nm_restarts=2)
    assert np.max(np.abs(n2.values - n1.values - shift4)) < 1e-7
