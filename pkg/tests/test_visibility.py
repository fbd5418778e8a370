import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from garmentrec.deform import Joint, SkinnedBody, Skeleton
from garmentrec.geometry.camera import Camera, project, unproject
from garmentrec.geometry.images import load_depth_pgm
from garmentrec.geometry.mesh import TriMesh, merge_meshes, uv_sphere
from garmentrec.visibility import (BodyCorrespondence, VisibilityMask, load_visibility, rasterize_depth,
                                   save_visibility, surface_aware_visibility, zbuffer_test)
from oracles import point_segment_distance_2d, raycast_depth, raycast_occluded
from scenes import (arm_torso_scene, front_camera, near_projected_edge, static_field, triangle_soup,
                    zbuffer_agreement)


def flat_triangle(z, cam, size=30.0, center=(50.0, 50.0)):
    """Triangle at constant camera depth ``z`` whose projection covers ``center`` generously."""
    c = np.asarray(center)
    pix = np.array([c + [-size, -size], c + [size, -size], c + [0, size]])
    return TriMesh(unproject(cam, pix, np.full(3, z)), [[0, 1, 2]])


# -- rasterization -----------------------------------------------------------------------

def test_single_triangle_depth():
    cam = front_camera(100, 100)
    assert rasterize_depth(flat_triangle(2.0, cam), cam).depth[50, 50] == pytest.approx(2.0, abs=1e-12)


def test_overlapping_triangles_keep_min():
    cam = front_camera(100, 100)
    buf = rasterize_depth(merge_meshes([flat_triangle(2.0, cam), flat_triangle(1.0, cam)]), cam)
    covered = np.isfinite(buf.depth)
    assert covered.sum() > 100 and np.allclose(buf.depth[covered], 1.0)


def test_empty_mesh_all_far():
    cam = front_camera(16, 12)
    buf = rasterize_depth(TriMesh.empty(), cam)
    assert buf.depth.shape == (12, 16) and np.all(np.isinf(buf.depth))


def test_behind_camera_triangles_skipped():
    cam = front_camera(32, 32)
    tri = TriMesh(np.array([[0.0, 0, -1], [1, 0, 2], [0, 1, 2]]), [[0, 1, 2]])
    assert np.all(np.isinf(rasterize_depth(tri, cam).depth))


def test_depth_matches_raycast_oracle(rng):
    cam = front_camera(64, 64, fx=50)
    mesh = triangle_soup(rng, 500)
    buf = rasterize_depth(mesh, cam)
    jj, ii = np.mgrid[0:64, 0:64]
    pix = np.stack([ii.ravel(), jj.ravel()], 1).astype(float)
    ref = raycast_depth(cam, pix, mesh.triangles())
    # pixel centers near any projected triangle edge are excluded
    v2 = project(cam, mesh.vertices)[0]
    f = mesh.faces
    a = np.concatenate([v2[f[:, 0]], v2[f[:, 1]], v2[f[:, 2]]])
    b = np.concatenate([v2[f[:, 1]], v2[f[:, 2]], v2[f[:, 0]]])
    far = np.ones(len(pix), bool)
    for s in range(0, len(pix), 256):
        far[s:s + 256] = point_segment_distance_2d(pix[s:s + 256], a, b).min(1) >= 0.5
    got = buf.depth.ravel()
    assert far.sum() > 1000
    g, r = got[far], ref[far]
    assert np.array_equal(np.isinf(g), np.isinf(r))
    fin = np.isfinite(r)
    assert np.abs(g[fin] - r[fin]).max() <= 1e-6


def test_rasterize_order_independent(rng):
    cam = front_camera(48, 48)
    mesh = triangle_soup(rng, 200)
    perm = rng.permutation(mesh.n_faces)
    shuffled = TriMesh(mesh.vertices, mesh.faces[perm])
    assert np.array_equal(rasterize_depth(mesh, cam).depth, rasterize_depth(shuffled, cam).depth)


def test_depth_pgm_dump(tmp_path):
    cam = front_camera(100, 100)
    buf = rasterize_depth(flat_triangle(2.0, cam), cam)
    buf.dump_pgm(tmp_path / "d.pgm")
    back = load_depth_pgm(tmp_path / "d.pgm")
    fin = np.isfinite(buf.depth)
    assert np.array_equal(np.isfinite(back.data), fin)
    assert np.allclose(back.data[fin], buf.depth[fin], atol=1e-3)


# -- z-buffer test -----------------------------------------------------------------------------

def test_zbuffer_in_front_and_behind():
    cam = front_camera(100, 100)
    eps = 0.01
    buf = rasterize_depth(flat_triangle(2.0, cam), cam, eps)
    front = unproject(cam, np.array([50.0, 50.0]), 1.5)
    behind = unproject(cam, np.array([50.0, 50.0]), 2.0 + 10 * eps)
    on = unproject(cam, np.array([50.0, 50.0]), 2.0)
    assert list(zbuffer_test(np.stack([front, behind, on]), buf, cam)) == [True, False, True]


def test_zbuffer_off_image_invisible():
    cam = front_camera(32, 32)
    buf = rasterize_depth(TriMesh.empty(), cam)
    assert not zbuffer_test(np.array([[10.0, 0, 1]]), buf, cam)[0]
    assert not zbuffer_test(np.array([[0.0, 0, -1]]), buf, cam)[0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_zbuffer_monotone_in_depth(seed):
    rng = np.random.default_rng(seed)
    cam = front_camera(48, 48)
    buf = rasterize_depth(triangle_soup(rng, 100), cam, 0.01)
    pix = rng.uniform(0, 47, (200, 2))
    z = rng.uniform(1.5, 4.5, 200)
    closer = z * rng.uniform(0.3, 1.0, 200)
    far_vis = zbuffer_test(unproject(cam, pix, z), buf, cam)
    near_vis = zbuffer_test(unproject(cam, pix, closer), buf, cam)
    assert np.all(near_vis[far_vis])


def test_zbuffer_agrees_with_raycast(rng):
    agree, kept = zbuffer_agreement(rng)
    assert kept >= 3000 and agree >= 0.99


# -- surface-aware visibility -----------------------------------------------------------------------

def sphere_scene():
    mesh = uv_sphere(0.3, 16, 48)
    ring = mesh.vertices[np.abs(mesh.vertices[:, 2]) < 1e-12]
    cam = Camera.look_at([2.5, 0, 0], [0, 0, 0], up=(0, 0, 1), fx=300, width=160, height=160)
    return cam, mesh, ring


def test_convex_garment_front_arc_visible():
    cam, mesh, ring = sphere_scene()
    eps = 0.01
    vis = surface_aware_visibility(ring, np.zeros(3), mesh, None, None, static_field(), 0, cam,
                                   "surface_aware", eps).visible
    assert np.all(vis[ring[:, 0] > 0.05]) and not np.any(vis[ring[:, 0] < -0.05])
    truth = ~raycast_occluded(cam, ring, mesh.triangles(), eps)
    keep = ~near_projected_edge(cam, ring, mesh)
    assert np.mean(vis[keep] == truth[keep]) >= 0.99


def arm_scene_masks(eps=0.01):
    cam, garment, body, curve, field = arm_torso_scene()
    corr = BodyCorrespondence.nearest(curve, body.mesh)
    masks = {m: surface_aware_visibility(curve, np.zeros(3), garment, body, corr, field, 0, cam, m, eps).visible
             for m in ("normal_only", "surface_only", "body_only", "surface_aware")}
    scene = merge_meshes([garment, body.mesh])
    truth = ~raycast_occluded(cam, curve, scene.triangles(), eps)
    keep = ~near_projected_edge(cam, curve, scene)
    return masks, truth, keep


def test_arm_occluding_torso():
    masks, truth, keep = arm_scene_masks()
    # normal_only keeps points hidden behind the arm
    assert np.sum(masks["normal_only"] & ~truth) >= 1
    assert not np.any(masks["surface_aware"] & ~truth & keep)
    assert np.mean(masks["surface_aware"][keep] == truth[keep]) >= 0.99


def test_surface_aware_is_conjunction():
    masks, _, _ = arm_scene_masks()
    assert np.array_equal(masks["surface_aware"], masks["surface_only"] & masks["body_only"])


def test_body_only_with_empty_body_is_all_visible():
    cam, mesh, ring = sphere_scene()
    body = SkinnedBody(TriMesh.empty(), np.zeros((0, 1)), np.ones((0, 1)), Skeleton([Joint("root", -1, np.eye(4))]))
    vis = surface_aware_visibility(ring, np.zeros(3), mesh, body, None, static_field(), 0, cam, "body_only")
    assert vis.visible.all()


def test_normal_only_uses_radial_direction():
    cam, mesh, ring = sphere_scene()
    vis = surface_aware_visibility(ring, np.zeros(3), None, None, None, static_field(), 0, cam, "normal_only").visible
    # tangent rays from the eye touch the sphere where x = r^2 / distance
    assert np.array_equal(vis, ring[:, 0] > 0.3 ** 2 / 2.5)


def test_visibility_errors():
    cam, mesh, ring = sphere_scene()
    fld = static_field()
    with pytest.raises(ValueError, match="unknown visibility mode"):
        surface_aware_visibility(ring, np.zeros(3), mesh, None, None, fld, 0, cam, "magic")
    with pytest.raises(ValueError, match="non-empty garment"):
        surface_aware_visibility(ring, np.zeros(3), TriMesh.empty(), None, None, fld, 0, cam, "surface_only")
    _, _, body, _, _ = arm_torso_scene(16)
    with pytest.raises(ValueError, match="body correspondence"):
        surface_aware_visibility(ring, np.zeros(3), mesh, body, None, fld, 0, cam, "body_only")
    with pytest.raises(ValueError):
        VisibilityMask(np.ones(3), "bogus")


def test_body_correspondence_is_nearest(rng):
    mesh = uv_sphere(0.5, 8, 16)
    pts = rng.normal(size=(50, 3))
    corr = BodyCorrespondence.nearest(pts, mesh)
    d = np.linalg.norm(pts[:, None] - mesh.vertices[None], axis=2)
    assert np.allclose(d[np.arange(50), corr.vertex], d.min(1))


def test_visibility_json_roundtrip(tmp_path):
    masks = {(0, "waist"): VisibilityMask(np.array([True, False, True]), "surface_aware"),
             (3, "hemline_bottom"): VisibilityMask(np.array([False]), "normal_only")}
    save_visibility(masks, tmp_path / "v.json")
    back = load_visibility(tmp_path / "v.json")
    assert back.keys() == masks.keys()
    for k in masks:
        assert np.array_equal(back[k].visible, masks[k].visible) and back[k].mode == masks[k].mode
