"""Assembly of the interior-penalty DG operator for the spreading model.

The stiffness matrix combines elementwise diffusion volume terms with
symmetric interior-penalty face terms over internal faces only: the domain
boundary carries a zero-flux condition, so boundary faces contribute
nothing.  The penalty per face is

    eta = degree^2 / H(h) * eta0 * max(H(dK), alpha)

where H is the harmonic average of the two neighbor values, h the element
diameters and dK the largest diffusion-tensor eigenvalue on each side.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .quadrature import face_rule
from .space import DGSpace


def harmonic_average(a: float, b: float) -> float:
    if a + b == 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


def face_penalty(face, mesh, model, degree: int, eta0: float, alpha: float) -> float:
    """Penalty value for one internal face."""
    left = mesh.elements[face.left]
    right = mesh.elements[face.right]
    if left.diameter <= 0 or right.diameter <= 0:
        raise ValueError("degenerate element (zero diameter) on face")
    h_avg = harmonic_average(left.diameter, right.diameter)
    dk_left = float(np.linalg.eigvalsh(model.tensor(left.axon))[-1])
    dk_right = float(np.linalg.eigvalsh(model.tensor(right.axon))[-1])
    dk_avg = harmonic_average(dk_left, dk_right)
    return degree**2 / h_avg * eta0 * max(dk_avg, alpha)


@dataclass
class DGSystem:
    """Assembled sparse operators plus caches for the state-dependent term."""

    space: DGSpace
    model: object
    alpha: float
    eta0: float
    mass: sp.csr_matrix = field(init=False)
    stiffness: sp.csr_matrix = field(init=False)
    linear_reaction: sp.csr_matrix = field(init=False)
    penalties: np.ndarray = field(init=False)  # per internal face

    def __post_init__(self):
        self._assemble()

    @property
    def mesh(self):
        return self.space.mesh

    @property
    def N(self) -> int:
        return self.space.N

    def _assemble(self):
        space, mesh = self.space, self.mesh
        nb = space.n_local
        tensors = [self.model.tensor(el.axon) for el in mesh.elements]

        rows_m, cols_m, vals_m = [], [], []
        rows_a, cols_a, vals_a = [], [], []

        def scatter(rows, cols, vals, block, dofs_i, dofs_j):
            ii, jj = np.meshgrid(
                np.arange(dofs_i.start, dofs_i.stop),
                np.arange(dofs_j.start, dofs_j.stop),
                indexing="ij",
            )
            rows.append(ii.ravel())
            cols.append(jj.ravel())
            vals.append(block.ravel())

        for e in range(mesh.n_elements):
            w = space.quad_wts[e]
            phi = space.basis_vals[e]
            grad = space.basis_grads[e]
            dofs = space.element_dofs(e)
            m_block = phi.T @ (w[:, None] * phi)
            dgrad = np.einsum("de,qje->qjd", tensors[e], grad)
            a_block = np.einsum("qid,q,qjd->ij", grad, w, dgrad)
            scatter(rows_m, cols_m, vals_m, m_block, dofs, dofs)
            scatter(rows_a, cols_a, vals_a, a_block, dofs, dofs)

        penalties = np.empty(len(mesh.internal_faces))
        for fi, face in enumerate(mesh.internal_faces):
            eta = face_penalty(face, mesh, self.model, space.degree, self.eta0, self.alpha)
            penalties[fi] = eta
            pts, w = face_rule(face.vertices, space.quad_exactness)
            n = face.normal
            sides = (face.left, face.right)
            signs = (1.0, -1.0)  # outward normal of each side relative to stored n
            phis = [space.eval_basis(el, pts) for el in sides]
            # co-normal derivative (D grad phi) . n on each side
            dn = [
                np.einsum("qjd,d->qj", space.eval_basis_grad(el, pts), tensors[el] @ n)
                for el in sides
            ]
            for bi, (el_b, s_b) in enumerate(zip(sides, signs)):
                dofs_b = space.element_dofs(el_b)
                for ai, (el_a, s_a) in enumerate(zip(sides, signs)):
                    dofs_a = space.element_dofs(el_a)
                    block = eta * s_a * s_b * (phis[bi].T @ (w[:, None] * phis[ai]))
                    block -= 0.5 * s_b * (phis[bi].T @ (w[:, None] * dn[ai]))
                    block -= 0.5 * s_a * (dn[bi].T @ (w[:, None] * phis[ai]))
                    scatter(rows_a, cols_a, vals_a, block, dofs_b, dofs_a)

        N = space.N
        self.mass = sp.csr_matrix(
            (np.concatenate(vals_m), (np.concatenate(rows_m), np.concatenate(cols_m))),
            shape=(N, N),
        )
        self.stiffness = sp.csr_matrix(
            (np.concatenate(vals_a), (np.concatenate(rows_a), np.concatenate(cols_a))),
            shape=(N, N),
        )
        self.linear_reaction = self.alpha * self.mass
        self.penalties = penalties

        # fixed block-diagonal scatter pattern for the nonlinear term
        blocks = np.arange(N).reshape(mesh.n_elements, nb)
        self._nl_rows = np.repeat(blocks, nb, axis=1).ravel()
        self._nl_cols = np.tile(blocks, (1, nb)).ravel()

    def nonlinear_reaction(self, C: np.ndarray) -> sp.csr_matrix:
        """State-dependent reaction matrix: entries alpha * (c_h phi_j, phi_i).

        Linear in the coefficient vector C.
        """
        space = self.space
        C = np.asarray(C, dtype=float)
        if C.shape != (space.N,):
            raise ValueError(f"coefficient vector has shape {C.shape}, want ({space.N},)")
        nb = space.n_local
        blocks = C.reshape(space.mesh.n_elements, nb)
        if space.uniform_quadrature:
            c_vals = np.einsum("eqi,ei->eq", space.basis_vals_stack, blocks)
            weighted = space.quad_wts_stack * c_vals
            data = self.alpha * np.einsum(
                "eqi,eq,eqj->eij", space.basis_vals_stack, weighted, space.basis_vals_stack
            )
        else:
            data = np.empty((space.mesh.n_elements, nb, nb))
            for e in range(space.mesh.n_elements):
                phi = space.basis_vals[e]
                c_vals = phi @ blocks[e]
                data[e] = self.alpha * (
                    phi.T @ ((space.quad_wts[e] * c_vals)[:, None] * phi)
                )
        return sp.csr_matrix(
            (data.reshape(-1), (self._nl_rows, self._nl_cols)),
            shape=(space.N, space.N),
        )


def assemble(
    mesh, model, alpha: float, eta0: float, degree: int, quad_exactness: int | None = None
) -> DGSystem:
    """Build the DG space and the assembled system in one call."""
    space = DGSpace(mesh, degree, quad_exactness=quad_exactness)
    return DGSystem(space=space, model=model, alpha=alpha, eta0=eta0)
