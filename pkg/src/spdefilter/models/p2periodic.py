"""Periodic P2 Lagrange elements on [0, L] and the assembly kernels.

Mesh: n_cells uniform cells of width h, periodic. Global dofs alternate
vertex, midpoint: dof 2i sits at x = i*h, dof 2i+1 at (i+1/2)*h, giving
2*n_cells dofs. Reference shape functions on [0,1]:

    N0 = (1-s)(1-2s),  N1 = 4s(1-s),  N2 = s(2s-1)

Second derivatives are cellwise constant (4, -8, 4)/h^2, which is what the
interior-penalty fourth-order form builds on: first derivatives of a C0
quadratic jump at vertices, and the form

    a(u,v) = (u_xx, v_xx) + <{u_xx},[v_x]> + <{v_xx},[u_x]> + (eta/h)<[u_x],[v_x]>

penalises those jumps (sums over vertices; {.} average, [.] jump). All
volume integrals use 4-point Gauss-Legendre per cell, exact through degree
7, comfortably covering the degree-5 convection integrand u^2 v_x.
"""

import numpy as np

__all__ = [
    "P2PeriodicMesh",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_cip",
    "noise_projection_matrix",
    "noise_projection",
    "nonlinear_form",
    "nonlinear_jacobian",
    "point_evaluation_matrix",
]


def _shape(s):
    s = np.asarray(s, dtype=float)
    return np.stack([(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)], axis=-1)


def _dshape(s):
    s = np.asarray(s, dtype=float)
    return np.stack([4 * s - 3, 4 - 8 * s, 4 * s - 1], axis=-1)


class P2PeriodicMesh:

    def __init__(self, length: float, n_cells: int):
        if n_cells < 4:
            raise ValueError("need at least 4 cells")
        self.length = float(length)
        self.n_cells = int(n_cells)
        self.h = self.length / self.n_cells
        self.n_dof = 2 * self.n_cells
        i = np.arange(self.n_cells)
        self.cells = np.stack([2 * i, 2 * i + 1, (2 * i + 2) % self.n_dof], axis=1)
        self.dof_x = np.arange(self.n_dof) * (self.h / 2.0)

        # 4-point Gauss-Legendre on [0,1]
        t, v = np.polynomial.legendre.leggauss(4)
        self.quad_s = 0.5 * (t + 1.0)
        self.quad_w = 0.5 * v
        self.shape_q = _shape(self.quad_s)    # (4, 3)
        self.dshape_q = _dshape(self.quad_s)  # (4, 3), reference derivative


def _scatter_cellwise(mesh, local):
    """Accumulate (n_cells, 3, 3) local blocks into a dense global matrix."""
    out = np.zeros((mesh.n_dof, mesh.n_dof))
    rows = mesh.cells[:, :, None]
    cols = mesh.cells[:, None, :]
    np.add.at(out, (np.broadcast_to(rows, local.shape),
                    np.broadcast_to(cols, local.shape)), local)
    return out


def assemble_mass(mesh) -> np.ndarray:
    """(u, v) mass matrix; symmetric positive definite, cyclically banded."""
    local = mesh.h * np.einsum("q,qi,qj->ij", mesh.quad_w, mesh.shape_q, mesh.shape_q)
    return _scatter_cellwise(mesh, np.broadcast_to(local, (mesh.n_cells, 3, 3)))


def assemble_stiffness(mesh) -> np.ndarray:
    """(u_x, v_x) stiffness matrix."""
    local = np.einsum("q,qi,qj->ij", mesh.quad_w, mesh.dshape_q, mesh.dshape_q) / mesh.h
    return _scatter_cellwise(mesh, np.broadcast_to(local, (mesh.n_cells, 3, 3)))


def assemble_cip(mesh, eta: float) -> np.ndarray:
    """Interior-penalty fourth-order form, all vertex terms, periodic."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    h = mesh.h
    n = mesh.n_dof
    out = np.zeros((n, n))

    # volume term: u_xx is cellwise constant, integral = h * u_xx * v_xx
    d2 = np.array([4.0, -8.0, 4.0]) / h**2
    vol = h * np.outer(d2, d2)
    np.add.at(out, (mesh.cells[:, :, None], mesh.cells[:, None, :]),
              np.broadcast_to(vol, (mesh.n_cells, 3, 3)))

    # vertex terms couple the 6 local dofs of the two adjacent cells
    dx_left = _dshape(1.0) / h    # trace of u_x from the left cell at its right end
    dx_right = _dshape(0.0) / h   # trace from the right cell at its left end
    for i in range(mesh.n_cells):
        left = mesh.cells[(i - 1) % mesh.n_cells]
        right = mesh.cells[i]
        dofs = np.concatenate([left, right])
        jump = np.concatenate([-dx_left, dx_right])
        avg = 0.5 * np.concatenate([d2, d2])
        block = (np.outer(avg, jump) + np.outer(jump, avg)
                 + (eta / h) * np.outer(jump, jump))
        np.add.at(out, (dofs[:, None], dofs[None, :]), block)
    return out


def noise_projection_matrix(mesh) -> np.ndarray:
    """(n_dof, n_cells) map taking cell noise to the load h^{-1/2} int_cell v dx."""
    ints = mesh.h * np.einsum("q,qi->i", mesh.quad_w, mesh.shape_q)  # (h/6, 2h/3, h/6)
    out = np.zeros((mesh.n_dof, mesh.n_cells))
    for loc in range(3):
        np.add.at(out, (mesh.cells[:, loc], np.arange(mesh.n_cells)),
                  ints[loc] / np.sqrt(mesh.h))
    return out


def noise_projection(mesh, d_w: np.ndarray) -> np.ndarray:
    """Load vector of the cellwise-constant noise functional."""
    d_w = np.asarray(d_w, dtype=float)
    if d_w.shape != (mesh.n_cells,):
        raise ValueError(f"noise vector has shape {d_w.shape}, "
                         f"expected ({mesh.n_cells},)")
    return noise_projection_matrix(mesh) @ d_w


def nonlinear_form(u: np.ndarray, mesh, gamma: float) -> np.ndarray:
    """Convection load vector, entry j: -int (gamma/2) u^2 phi_j' dx."""
    u_q = u[mesh.cells] @ mesh.shape_q.T                     # (n_cells, 4)
    coef = (-0.5 * gamma) * mesh.quad_w * u_q**2             # h cancels against 1/h
    local = coef @ mesh.dshape_q                             # (n_cells, 3)
    out = np.zeros(mesh.n_dof)
    np.add.at(out, mesh.cells, local)
    return out


def nonlinear_jacobian(u: np.ndarray, mesh, gamma: float) -> np.ndarray:
    """d nonlinear_form / du: entry (j, k) = -gamma int u phi_k phi_j' dx."""
    u_q = u[mesh.cells] @ mesh.shape_q.T
    coef = -gamma * mesh.quad_w * u_q                        # (n_cells, 4)
    local = np.einsum("cq,qj,qk->cjk", coef, mesh.dshape_q, mesh.shape_q)
    out = np.zeros((mesh.n_dof, mesh.n_dof))
    np.add.at(out, (mesh.cells[:, :, None], mesh.cells[:, None, :]), local)
    return out


def point_evaluation_matrix(mesh, points: np.ndarray) -> np.ndarray:
    """(n_points, n_dof) matrix evaluating u_h at given locations."""
    pts = np.mod(np.asarray(points, dtype=float), mesh.length)
    cells = np.minimum((pts / mesh.h).astype(int), mesh.n_cells - 1)
    s = pts / mesh.h - cells
    out = np.zeros((pts.size, mesh.n_dof))
    vals = _shape(s)
    for row in range(pts.size):
        out[row, mesh.cells[cells[row]]] += vals[row]
    return out
