import numpy as np
import pytest
import scipy.sparse as sp

from superid.fem import (
    LinearSolver,
    SolverError,
    assemble_consistent_mass,
    assemble_lumped_mass,
    assemble_stiffness,
    build_mesh,
    read_nodal_field,
    solve_dirichlet,
    write_nodal_field,
)


@pytest.mark.parametrize("n, nv, nt", [(1, 4, 2), (3, 16, 18), (32, 1089, 2048)])
def test_mesh_counts(n, nv, nt):
    mesh = build_mesh(n)
    assert mesh.n_vertices == nv
    assert len(mesh.triangles) == nt


def test_mesh_areas_shoelace():
    mesh = build_mesh(3)
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    shoelace = 0.5 * (x[:, 0] * (y[:, 1] - y[:, 2]) + x[:, 1] * (y[:, 2] - y[:, 0]) + x[:, 2] * (y[:, 0] - y[:, 1]))
    np.testing.assert_allclose(shoelace, 1 / 18, rtol=1e-14)
    np.testing.assert_allclose(mesh.signed_areas(), 1 / 18, rtol=1e-14)


def test_mesh_boundary_and_ordering():
    mesh = build_mesh(4)
    on_edge = np.any(np.isin(mesh.vertices, [0.0, 1.0]), axis=1)
    np.testing.assert_array_equal(mesh.boundary_mask, on_edge)
    # lexicographic by (row, column)
    order = np.lexsort((mesh.vertices[:, 0], mesh.vertices[:, 1]))
    np.testing.assert_array_equal(order, np.arange(mesh.n_vertices))


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_mesh_rejects(bad):
    with pytest.raises(ValueError):
        build_mesh(bad)


def test_stiffness_rows_and_symmetry():
    for n in (1, 2, 5):
        A = assemble_stiffness(build_mesh(n))
        np.testing.assert_allclose(np.asarray(A.sum(axis=1)).ravel(), 0.0, atol=1e-13)
        assert abs(A - A.T).max() < 1e-14


def test_stiffness_interior_diagonal():
    mesh = build_mesh(2)
    A = assemble_stiffness(mesh)
    center = mesh.interior[0]
    assert A[center, center] == pytest.approx(4.0)


def test_stiffness_interior_positive_definite():
    mesh = build_mesh(6)
    A = assemble_stiffness(mesh).toarray()[np.ix_(mesh.interior, mesh.interior)]
    np.linalg.cholesky(A)


def test_lumped_mass():
    for n in (1, 2, 7):
        M = assemble_lumped_mass(build_mesh(n))
        assert M.diagonal().sum() == pytest.approx(1.0, abs=1e-14)
    mesh = build_mesh(2)
    d = assemble_lumped_mass(mesh).diagonal()
    assert d[mesh.interior[0]] == pytest.approx(6 * (1 / 8) / 3)
    d1 = assemble_lumped_mass(build_mesh(1)).diagonal()
    # corners on the cut diagonal belong to both triangles
    np.testing.assert_allclose(d1, [1 / 3, 1 / 6, 1 / 6, 1 / 3])


def test_consistent_mass_rowsums_match_lumped():
    mesh = build_mesh(5)
    Mc = assemble_consistent_mass(mesh)
    Ml = assemble_lumped_mass(mesh)
    np.testing.assert_allclose(np.asarray(Mc.sum(axis=1)).ravel(), Ml.diagonal(), atol=1e-15)


def _manufactured_error(n):
    mesh = build_mesh(n)
    A = assemble_stiffness(mesh)
    m = assemble_lumped_mass(mesh).diagonal()
    idx = mesh.interior
    f = mesh.sample(lambda a, b: 2 * np.pi**2 * np.sin(np.pi * a) * np.sin(np.pi * b))
    y = solve_dirichlet(A[idx][:, idx], m[idx] * f[idx], mesh=mesh)
    exact = mesh.sample(lambda a, b: np.sin(np.pi * a) * np.sin(np.pi * b))
    return np.max(np.abs(y - exact))


def test_manufactured_poisson_quadratic():
    errs = [_manufactured_error(n) for n in (8, 16, 32, 64)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3) & (ratios <= 5.5)), ratios


def test_solve_dirichlet_zero_and_recovery(rng):
    mesh = build_mesh(10)
    idx = mesh.interior
    A = assemble_stiffness(mesh)[idx][:, idx]
    np.testing.assert_array_equal(solve_dirichlet(A, np.zeros(len(idx))), 0.0)
    w = rng.standard_normal(len(idx))
    for method in ("direct", "cg"):
        x = solve_dirichlet(A, A @ w, tol=1e-12, method=method)
        np.testing.assert_allclose(x, w, atol=1e-9)
    full = solve_dirichlet(A, A @ w, mesh=mesh)
    assert np.all(full[mesh.boundary_mask] == 0)


def test_solver_failure_is_explicit():
    mesh = build_mesh(20)
    idx = mesh.interior
    A = assemble_stiffness(mesh)[idx][:, idx]
    solver = LinearSolver(A, tol=1e-14, method="cg", maxiter=2)
    with pytest.raises(SolverError):
        solver.solve(np.ones(len(idx)))


def test_nearby_solve_matches_direct(rng):
    mesh = build_mesh(12)
    idx = mesh.interior
    A = assemble_stiffness(mesh)[idx][:, idx]
    m = assemble_lumped_mass(mesh).diagonal()[idx]
    ref = LinearSolver(A + sp.diags(m))
    B = A + sp.diags(m * (1 + 0.1 * rng.random(len(idx))))
    b = rng.standard_normal(len(idx))
    x = ref.solve_nearby(B, b)
    np.testing.assert_allclose(x, LinearSolver(B).solve(b), rtol=1e-9, atol=1e-12)


def test_nodal_dump_roundtrip(tmp_path):
    mesh = build_mesh(3)
    vals = np.arange(mesh.n_vertices, dtype=float) / 7
    write_nodal_field(tmp_path / "y.txt", mesh, vals)
    coords, back = read_nodal_field(tmp_path / "y.txt")
    np.testing.assert_array_equal(coords, mesh.vertices)
    np.testing.assert_array_equal(back, vals)
