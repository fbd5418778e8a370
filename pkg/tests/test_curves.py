import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from garmentrec.curves import (CurveDeformState, CurveLossWeights, CurveSet, CurveTarget, NoVisiblePointsError,
                               ProjectionTerm, RigidCurveTransform, anap_loss, default_surfaces, deform_curve,
                               fit_rigid_init, init_curve_state, projection_loss, reprojection_error, slope_loss,
                               total_curve_loss)
from garmentrec.deform import axis_angle_quat, quat_to_matrix
from garmentrec.geometry.camera import Camera, project
from garmentrec.geometry.curves import PolyCurve3
from garmentrec.geometry.grid import OutOfDomainError, SdfGrid
from garmentrec.optim import DivergenceError
from oracles import brute_chamfer, central_fd, polygon_is_simple, rel_err
from scenes import circle_curve, star_polygon, static_field

SQUARE = np.array([[1.0, 1, 0], [-1, 1, 0], [-1, -1, 0], [1, -1, 0]])  # counter-clockwise seen from +z


def camera():
    return Camera.look_at([0.0, 1.5, 2.6], [0, 0, 0], fx=300, width=256, height=256)


def random_closed_curve(rng, n=None):
    n = n or int(rng.integers(5, 40))
    th = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.2, 1.0, n)
    p = np.stack([r * np.cos(th), r * np.sin(th), rng.normal(scale=0.05, size=n)], 1)
    rot = quat_to_matrix(axis_angle_quat(rng.normal(size=3), rng.uniform(0, np.pi)))
    return p @ rot.T + rng.normal(size=3)


# -- deformation state ------------------------------------------------------------------

def test_init_square():
    st_ = init_curve_state(PolyCurve3(SQUARE))
    assert np.allclose(st_.center, 0)
    assert np.allclose(st_.dirs, SQUARE / np.sqrt(2))
    assert np.allclose(st_.eta, np.sqrt(2)) and np.all(st_.lam == 0)


def test_init_square_normal_matches_cross_product_average():
    st_ = init_curve_state(PolyCurve3(SQUARE))
    d = SQUARE / np.sqrt(2)
    acc = np.zeros(3)
    for i in range(4):
        acc += np.cross(d[i], d[i - 1])
    acc /= 3
    assert np.allclose(st_.normal, acc / np.linalg.norm(acc))
    assert np.allclose(st_.normal, [0, 0, -1])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_identity_roundtrip(seed):
    c = random_closed_curve(np.random.default_rng(seed))
    assert np.abs(deform_curve(init_curve_state(PolyCurve3(c))).points - c).max() <= 1e-9


def test_deform_radial_scaling_and_normal_shift():
    st_ = init_curve_state(PolyCurve3(SQUARE))
    st2 = st_.copy()
    st2.eta[:] = 2.0
    assert np.allclose(np.abs(deform_curve(st2).points[:, :2]), np.sqrt(2))
    st3 = st_.copy()
    st3.lam[:] = 0.3
    assert np.allclose(deform_curve(st3).points, SQUARE + 0.3 * st_.normal)
    # anchors are untouched by evaluation
    assert np.array_equal(st3.dirs, st_.dirs) and np.array_equal(st3.center, st_.center)


def test_init_errors():
    pts = np.array([[1.0, 0, 0], [0, 0, 0], [-1, 0, 0.0], [0, 0, 1e-12]])
    pts[3] = -pts[:3].sum(0)  # centroid at the origin, which is point 1
    with pytest.raises(ValueError, match="degenerate radial direction"):
        init_curve_state(PolyCurve3(pts))
    with pytest.raises(ValueError, match="closed"):
        init_curve_state(PolyCurve3(SQUARE, closed=False))


def test_eta_floor_clamp():
    st_ = init_curve_state(PolyCurve3(SQUARE))
    st_.set_params(np.concatenate([np.full(4, -1.0), np.zeros(4)]))
    assert np.all(st_.eta == 1e-4)


def test_order_preserved_for_star_shapes(rng):
    for _ in range(100):
        n = int(rng.integers(5, 30))
        st_ = init_curve_state(PolyCurve3(star_polygon(rng, n)))
        st_.set_params(np.concatenate([rng.uniform(1e-3, 3, n), np.full(n, rng.normal())]))
        assert polygon_is_simple(deform_curve(st_).points[:, :2])


def test_curveset_rules(tmp_path):
    s = init_curve_state(PolyCurve3(SQUARE))
    cs = CurveSet({"waist": s, "hemline_bottom": s.copy()},
                  {"waist": ("upper_clothing", "bottom_clothing"), "hemline_bottom": ("bottom_clothing",)})
    with pytest.raises(ValueError):
        CurveSet({"neckline": s}, {"neckline": ("upper_clothing", "bottom_clothing")})
    with pytest.raises(ValueError):
        CurveSet({"sleeve": s})
    cs.save(tmp_path / "c.json")
    back = CurveSet.load(tmp_path / "c.json")
    assert back.names() == cs.names()
    assert np.allclose(back["waist"].points(), cs["waist"].points())
    assert back.surfaces == cs.surfaces


def test_default_surfaces():
    assert default_surfaces("skirt") == {"waist": ("bottom_clothing",), "hemline_bottom": ("bottom_clothing",)}
    assert default_surfaces("upper+bottom")["waist"] == ("upper_clothing", "bottom_clothing")
    with pytest.raises(ValueError):
        default_surfaces("hat")


def test_loss_weights_validated():
    with pytest.raises(ValueError):
        CurveLossWeights(1.0, -0.1, 1.0)


# -- projection loss ------------------------------------------------------------------------

def circle_state(n=24, radius=0.3):
    return init_curve_state(PolyCurve3(circle_curve(n, radius)))


def test_projection_exact_is_zero():
    st_, cam, fld = circle_state(), camera(), static_field()
    target = project(cam, st_.points())[0]
    assert projection_loss(st_, np.ones(24, bool), cam, fld, 0, target) <= 1e-9


def test_projection_uniform_shift():
    st_, cam, fld = circle_state(), camera(), static_field()
    target = project(cam, st_.points())[0] + [3.0, 0.0]
    assert projection_loss(st_, np.ones(24, bool), cam, fld, 0, target) == pytest.approx(6.0, abs=1e-9)


def test_projection_visible_subset_matches_brute_force(rng):
    st_, cam, fld = circle_state(), camera(), static_field()
    vis = np.zeros(24, bool)
    vis[rng.choice(24, 12, replace=False)] = True
    target = rng.uniform(50, 200, (30, 2))
    got = projection_loss(st_, vis, cam, fld, 0, target)
    ref = brute_chamfer(project(cam, st_.points()[vis])[0], target)
    assert got == pytest.approx(ref, abs=1e-9)


def test_projection_errors():
    st_, cam, fld = circle_state(), camera(), static_field()
    with pytest.raises(NoVisiblePointsError, match="no visible points"):
        projection_loss(st_, np.zeros(24, bool), cam, fld, 0, np.zeros((3, 2)))
    with pytest.raises(ValueError, match="empty target curve"):
        projection_loss(st_, np.ones(24, bool), cam, fld, 0, np.zeros((0, 2)))


# -- slope loss -----------------------------------------------------------------------------

def slope_reference(p):
    total = 0.0
    n = len(p)
    for i in range(n):
        s0 = p[(i + 1) % n] - p[i]
        s1 = p[(i + 2) % n] - p[(i + 1) % n]
        total += 1 - np.dot(s0, s1) / (np.linalg.norm(s0) * np.linalg.norm(s1))
    return total


def test_slope_polygons():
    hexagon = circle_curve(6, 1.0, normal_axis=2)
    assert slope_loss(hexagon) == pytest.approx(3.0, abs=1e-12)
    assert slope_loss(SQUARE) == pytest.approx(4.0, abs=1e-12)


def test_slope_random_matches_reference(rng):
    p = random_closed_curve(rng, 20)
    assert slope_loss(p) == pytest.approx(slope_reference(p), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.1, 10))
def test_slope_rigid_and_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    p = random_closed_curve(rng)
    rot = quat_to_matrix(axis_angle_quat(rng.normal(size=3), rng.uniform(0, np.pi)))
    q = scale * p @ rot.T + rng.normal(size=3)
    assert slope_loss(q) == pytest.approx(slope_loss(p), abs=1e-9)


def test_slope_errors():
    with pytest.raises(ValueError, match="degenerate segment"):
        slope_loss(np.array([[0, 0, 0], [1, 0, 0], [1, 0, 0], [0, 1, 0]], float))


# -- anap loss ---------------------------------------------------------------------------------

def sphere_grid(dims=48):
    return SdfGrid.from_function(lambda p: np.linalg.norm(p, axis=1) - 0.5, -np.ones(3), np.ones(3), dims)


def test_anap_on_and_off_sphere():
    g = sphere_grid()
    h = g.min_spacing
    on = circle_curve(40, 0.5, normal_axis=1, phase=0.1)
    assert anap_loss(on, g) <= 40 * h
    off = circle_curve(40, 0.5 + 2 * h, normal_axis=1, phase=0.1)
    assert anap_loss(off, g) == pytest.approx(40 * 2 * h, rel=0.2)


def test_anap_zero_grid_and_domain():
    g = SdfGrid.from_bounds(-np.ones(3), np.ones(3), 4)
    assert anap_loss(circle_curve(8, 0.5), g) == 0.0
    with pytest.raises(OutOfDomainError, match="out of domain"):
        anap_loss(circle_curve(8, 1.5), g)


# -- total loss and gradients ------------------------------------------------------------------------

def test_total_loss_zero_weights():
    st_, cam, fld = circle_state(), camera(), static_field()
    terms = [ProjectionTerm(0, cam, np.ones(24, bool), project(cam, st_.points())[0] + 1)]
    v, g = total_curve_loss(st_, CurveLossWeights(0, 0, 0), terms, fld, sphere_grid())
    assert v == 0 and not g.any()


def test_total_slope_scale_direction_has_zero_gradient():
    st_ = circle_state(12)
    _, g = total_curve_loss(st_, CurveLossWeights(0, 1, 0), [], None, None)
    assert abs(np.dot(g[:12], st_.eta)) <= 1e-12


def random_loss_instance(rng):
    n = 16
    p = circle_curve(n, 0.4, normal_axis=1) + rng.normal(scale=0.03, size=(n, 3))
    st_ = init_curve_state(PolyCurve3(p))
    st_.set_params(st_.params() + rng.normal(scale=0.02, size=2 * n))
    cam = camera()
    tgt = project(cam, circle_curve(20, 0.42, normal_axis=1, phase=0.13))[0]
    vis = rng.random(n) < 0.7
    vis[0] = True
    grid = SdfGrid.from_bounds(-np.ones(3), np.ones(3), 9, rng.normal(scale=0.2, size=(9, 9, 9)))
    return st_, [ProjectionTerm(0, cam, vis, tgt)], grid


def test_total_loss_gradient_matches_fd(rng):
    fld = static_field()
    w = CurveLossWeights(1.0, 0.5, 0.7)
    for _ in range(10):
        st_, terms, grid = random_loss_instance(rng)
        _, g = total_curve_loss(st_, w, terms, fld, grid)

        def f(x):
            s = st_.copy()
            s.eta, s.lam = x[:len(s)].copy(), x[len(s):].copy()
            return total_curve_loss(s, w, terms, fld, grid)[0]
        assert rel_err(g, central_fd(f, st_.params(), 1e-7)) <= 1e-3


def test_projection_lattice_gradient_matches_fd(rng):
    fld = static_field(lattice=True)
    fld.lattice.offsets[0] = rng.normal(scale=0.01, size=fld.lattice.offsets[0].shape)
    st_, terms, grid = random_loss_instance(rng)
    lat = {}
    total_curve_loss(st_, CurveLossWeights(1, 0, 0), terms, fld, grid, lattice_grads=lat)

    def f(x):
        fld.lattice.offsets[0] = x
        return total_curve_loss(st_, CurveLossWeights(1, 0, 0), terms, fld, grid)[0]
    fd = central_fd(f, fld.lattice.offsets[0].copy(), 1e-7)
    assert rel_err(lat[0], fd) <= 1e-3


# -- rigid initialization ----------------------------------------------------------------------------

def targets_from(points, frames=1):
    cam = camera()
    return [CurveTarget(t, cam, project(cam, points)[0]) for t in range(frames)]


def test_rigid_aligned_template():
    tmpl = PolyCurve3(circle_curve(32, 0.3, normal_axis=1))
    fld = static_field()
    tf = fit_rigid_init(tmpl, targets_from(tmpl.points), fld)
    assert reprojection_error(tf.apply(tmpl.points), targets_from(tmpl.points), fld) <= 0.5


def test_rigid_recovers_known_transform():
    base = circle_curve(40, 0.3, normal_axis=1) + 0.05 * np.sin(3 * np.linspace(0, 2 * np.pi, 40, endpoint=False))[:, None]
    tmpl = PolyCurve3(base)
    true = RigidCurveTransform(1.3, axis_angle_quat([0.3, 1, 0.2], np.radians(20)), np.array([0.1, -0.05, 0.02]))
    targets = targets_from(true.apply(tmpl.points))
    fld = static_field()
    hist = []
    tf = fit_rigid_init(tmpl, targets, fld, history=hist)
    err = reprojection_error(tf.apply(tmpl.points), targets, fld)
    assert err <= 2.0
    assert min(hist) <= hist[0]


def test_rigid_zero_iters_is_identity():
    tmpl = PolyCurve3(circle_curve(16, 0.3, normal_axis=1))
    tf = fit_rigid_init(tmpl, targets_from(tmpl.points * 1.2), static_field(), iters=0)
    assert tf.scale == 1.0 and np.allclose(tf.matrix, np.eye(3)) and np.allclose(tf.translation, 0)


def test_rigid_errors():
    tmpl = PolyCurve3(circle_curve(16, 0.3, normal_axis=1))
    with pytest.raises(ValueError, match="no target frames"):
        fit_rigid_init(tmpl, [], static_field())
    bad = [CurveTarget(0, camera(), np.full((5, 2), np.nan))]
    with pytest.raises(DivergenceError, match="optimization diverged"):
        fit_rigid_init(tmpl, bad, static_field())


def test_rigid_transform_validation_and_roundtrip():
    with pytest.raises(ValueError):
        RigidCurveTransform(-1.0, np.array([1.0, 0, 0, 0]), np.zeros(3))
    with pytest.raises(ValueError):
        RigidCurveTransform(1.0, np.array([1.0, 1, 0, 0]), np.zeros(3))
    tf = RigidCurveTransform(1.5, axis_angle_quat([0, 1, 0], 0.4), np.array([0.1, 0.2, 0.3]))
    back = RigidCurveTransform.from_dict(tf.to_dict())
    p = np.random.default_rng(0).normal(size=(5, 3))
    assert np.allclose(back.apply(p), tf.apply(p))
    assert np.allclose(tf.apply(p), 1.5 * p @ quat_to_matrix(tf.rotation).T + tf.translation)
