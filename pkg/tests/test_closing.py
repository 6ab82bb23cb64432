import numpy as np
import pytest

from mixdec.errors import InconclusiveError, SurgeryInstanceError
from mixdec.orbits import TAU_ORB
from mixdec.surgery import (
    Bump,
    Chart,
    PerturbedMap,
    Tile,
    close_orbit,
    make_domain,
    perturbation_size,
    validate_domain,
)


def circle_domain(n_steps=2, theta=0.5):
    chart = Chart(
        center=np.array([0.0]),
        half_widths=np.array([0.08]),
        tiles=(Tile(center=np.array([0.0]), edge=0.1),),
    )
    return make_domain([chart], n_steps=n_steps, theta=theta, delta=0.2)


def test_domain_for_closing_is_valid(rotation_third_eps):
    report = validate_domain(circle_domain(), rotation_third_eps)
    assert report.valid


def test_close_orbit_end_to_end(rotation_third_eps):
    """Near-rotation by 1/3: closing x = 0 with ell = 2 yields a genuine
    period-3 orbit through a point ~3e-6 from x, with the perturbation
    supported exactly on the certified balls."""
    sys = rotation_third_eps
    dom = circle_domain()
    result = close_orbit(sys, dom, [0.0], ell=2, region=[([0.0], [1.0])])
    assert not result.trivial
    assert result.orbit.period == 3
    assert result.orbit.residual < 1e-10
    assert result.orbit.period % 2 == 1
    assert result.anchor_shift == pytest.approx(3e-6, rel=1e-3)
    assert result.in_region is True
    assert result.surgery.certified
    assert result.surgery.condition3 is True

    perturbed = result.system
    assert len(perturbed.bumps) == 2
    for bump in perturbed.bumps:
        # lemma contract: displacement theta * radius, inside the ball
        assert np.linalg.norm(bump.displacement) == pytest.approx(
            dom.theta * bump.radius, rel=1e-9
        )

    # support exactness: identical off the balls, moved at the centers
    rng = np.random.default_rng(3)
    for x in rng.random(200):
        p = np.array([x])
        inside = any(
            perturbed.distance(p, b.center) < b.radius
            for b in perturbed.bumps
        )
        same = np.allclose(
            sys.evaluate(p), perturbed.evaluate(p), rtol=0, atol=0
        )
        if not inside:
            assert same
    for b in perturbed.bumps:
        moved = perturbed.distance(
            sys.evaluate(b.center), perturbed.evaluate(b.center)
        )
        assert moved == pytest.approx(dom.theta * b.radius, rel=1e-9)


def test_close_orbit_perturbation_sizes(rotation_third_eps):
    sys = rotation_third_eps
    result = close_orbit(sys, circle_domain(), [0.0], ell=2)
    c0, c1 = perturbation_size(sys, result.system, sample_budget=500, seed=1)
    # C0 peaks at the ball centers: theta * r = 1.5e-6
    assert c0 == pytest.approx(1.5e-6, rel=1e-6)
    # C1 peaks mid-ball: |psi'(1/2)| * theta = 1.5 * 0.5
    assert c1 <= 0.75 + 1e-9
    assert c1 > 0.5
    # both inside the configured perturbation budget
    assert c0 < 1.0 and c1 < 1.0


def test_close_orbit_trivial_when_already_periodic(rotation_third):
    result = close_orbit(rotation_third, circle_domain(), [0.0], ell=2)
    assert result.trivial
    assert result.orbit.period == 3
    assert result.anchor_shift == 0.0
    assert result.surgery is None
    assert result.system is rotation_third


def test_close_orbit_inconclusive_on_resonant_returns(rotation_half):
    # every return of x = 0 under rotation by 1/2 is a multiple of 2
    with pytest.raises(InconclusiveError):
        close_orbit(rotation_half, circle_domain(), [0.0], ell=2)


def test_close_orbit_inconclusive_when_period_matches_ell(rotation_third):
    with pytest.raises(InconclusiveError):
        close_orbit(rotation_third, circle_domain(), [0.0], ell=3)


def test_close_orbit_needs_tile(rotation_third_eps):
    with pytest.raises(SurgeryInstanceError):
        close_orbit(rotation_third_eps, circle_domain(), [0.5], ell=2)


def test_perturbation_size_identical(rotation_third):
    assert perturbation_size(rotation_third, rotation_third, 200) == (0.0, 0.0)


def test_single_bump_c0_is_displacement_at_center(rotation_third):
    bump = Bump(
        center=np.array([0.2]),
        radius=0.01,
        displacement=np.array([0.004]),  # theta = 0.4 times the radius
    )
    perturbed = PerturbedMap(rotation_third, [bump])
    c0, c1 = perturbation_size(rotation_third, perturbed, 500, seed=2)
    assert c0 == pytest.approx(0.004, rel=1e-9)


def test_perturbed_map_jacobian_matches_fd(rotation_third):
    bump = Bump(
        center=np.array([0.2]),
        radius=0.01,
        displacement=np.array([0.004]),
    )
    g = PerturbedMap(rotation_third, [bump])
    for x in (0.2, 0.196, 0.2031, 0.205, 0.3):
        p = np.array([x])
        h = 1e-7
        fd = (g.evaluate(p + h) - g.evaluate(p - h)) / (2 * h)
        assert g.jacobian(p)[0, 0] == pytest.approx(fd[0], abs=1e-5)
