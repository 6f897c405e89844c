"""Structured mesh generation, validation, dof layout and mesh files."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from dualfsi.core.exceptions import InvalidConfigError, MeshParseError
from dualfsi.models.mesh import DofMap, Mesh2D

logger = logging.getLogger(__name__)

MESH_HEADER = "mesh2d v1"

# cavity height fraction below the inflow/outflow strip
CAVITY_FRACTION = 0.875


def _check_counts(**counts: int) -> None:
    for name, value in counts.items():
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
            raise InvalidConfigError(f"{name} must be an integer >= 1, got {value!r}")


def _check_lengths(**lengths: float) -> None:
    for name, value in lengths.items():
        if not np.isfinite(value) or value <= 0.0:
            raise InvalidConfigError(f"{name} must be positive, got {value!r}")


def _structured_block(
    xs: np.ndarray, ys: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, Dict[str, np.ndarray]]:
    """Tensor grid of quads; returns coords, connectivity and the four sides.

    Node (i, j) has id j * (nx + 1) + i. Sides are lists of (element, local edge):
    bottom uses local edge 0, right 1, top 2, left 3.
    """
    nx, ny = len(xs) - 1, len(ys) - 1
    gx, gy = np.meshgrid(xs, ys)
    coords = np.column_stack([gx.ravel(), gy.ravel()]).astype(float)

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    n00 = j * (nx + 1) + i
    elements = np.column_stack([n00, n00 + 1, n00 + nx + 2, n00 + nx + 1]).astype(np.int64)

    elem_id = lambda ii, jj: jj * nx + ii  # noqa: E731
    cols = np.arange(nx)
    rows = np.arange(ny)
    sides = {
        "bottom": np.column_stack([elem_id(cols, 0), np.zeros(nx, dtype=np.int64)]),
        "right": np.column_stack([elem_id(nx - 1, rows), np.ones(ny, dtype=np.int64)]),
        "top": np.column_stack([elem_id(cols, ny - 1), np.full(nx, 2, dtype=np.int64)]),
        "left": np.column_stack([elem_id(0, rows), np.full(ny, 3, dtype=np.int64)]),
    }
    return coords, elements, {k: v.astype(np.int64) for k, v in sides.items()}


class MeshService:
    """Mesh generation and queries for the fluid and solid fields."""

    @staticmethod
    def generate_column_meshes(
        fluid_len: float,
        solid_len: float,
        width: float,
        nx_fluid: int,
        nx_solid: int,
        ny: int,
        ny_solid: Optional[int] = None,
    ) -> Tuple[Mesh2D, Mesh2D]:
        """Fluid column [0, ℓF]×[0, w] next to a solid column [ℓF, ℓF+ℓS]×[0, w]."""
        ny_solid = ny if ny_solid is None else ny_solid
        _check_lengths(fluid_len=fluid_len, solid_len=solid_len, width=width)
        _check_counts(nx_fluid=nx_fluid, nx_solid=nx_solid, ny=ny, ny_solid=ny_solid)

        coords, elems, sides = _structured_block(
            np.linspace(0.0, fluid_len, nx_fluid + 1), np.linspace(0.0, width, ny + 1)
        )
        fluid = Mesh2D(
            node_coords=coords,
            elements=elems,
            edge_sets={
                "interface": sides["right"],
                "neumann": sides["left"],
                "lateral": np.vstack([sides["bottom"], sides["top"]]),
            },
        )

        coords, elems, sides = _structured_block(
            np.linspace(fluid_len, fluid_len + solid_len, nx_solid + 1),
            np.linspace(0.0, width, ny_solid + 1),
        )
        solid = Mesh2D(
            node_coords=coords,
            elements=elems,
            edge_sets={
                "interface": sides["left"],
                "dirichlet": sides["right"],
                "lateral": np.vstack([sides["bottom"], sides["top"]]),
            },
        )
        MeshService.validate_mesh(fluid)
        MeshService.validate_mesh(solid)
        return fluid, solid

    @staticmethod
    def generate_cavity_meshes(
        n_cav: int,
        n_top: int,
        n_solid_x: int,
        n_solid_y: int,
        solid_thickness: float = 0.05,
    ) -> Tuple[Mesh2D, Mesh2D]:
        """Unit-square cavity with inflow/outflow strip on top and a flexible bottom."""
        _check_counts(n_cav=n_cav, n_top=n_top, n_solid_x=n_solid_x, n_solid_y=n_solid_y)
        _check_lengths(solid_thickness=solid_thickness)

        ys = np.concatenate(
            [
                np.linspace(0.0, CAVITY_FRACTION, n_cav + 1),
                np.linspace(CAVITY_FRACTION, 1.0, n_top + 1)[1:],
            ]
        )
        coords, elems, sides = _structured_block(np.linspace(0.0, 1.0, n_cav + 1), ys)
        left, right = sides["left"], sides["right"]
        fluid = Mesh2D(
            node_coords=coords,
            elements=elems,
            edge_sets={
                "interface": sides["bottom"],
                "lid": sides["top"],
                "wall_left": left[:n_cav],
                "inflow": left[n_cav:],
                "wall_right": right[:n_cav],
                "outflow": right[n_cav:],
            },
        )

        coords, elems, sides = _structured_block(
            np.linspace(0.0, 1.0, n_solid_x + 1), np.linspace(-solid_thickness, 0.0, n_solid_y + 1)
        )
        solid = Mesh2D(
            node_coords=coords,
            elements=elems,
            edge_sets={
                "interface": sides["top"],
                "bottom": sides["bottom"],
                "clamped_left": sides["left"],
                "clamped_right": sides["right"],
            },
        )
        MeshService.validate_mesh(fluid)
        MeshService.validate_mesh(solid)
        return fluid, solid

    @staticmethod
    def corner_jacobians(coords: np.ndarray, elements: np.ndarray) -> np.ndarray:
        """(n_elems, 4) cross products of the two edges meeting at each corner."""
        xy = coords[elements]
        nxt = np.roll(xy, -1, axis=1) - xy
        prv = np.roll(xy, 1, axis=1) - xy
        return nxt[..., 0] * prv[..., 1] - nxt[..., 1] * prv[..., 0]

    @staticmethod
    def validate_mesh(mesh: Mesh2D) -> None:
        """Check corner Jacobians and that every tagged edge is a boundary edge."""
        if mesh.node_coords.ndim != 2 or mesh.node_coords.shape[1] != 2:
            raise InvalidConfigError("node_coords must have shape (n, 2)")
        if mesh.elements.ndim != 2 or mesh.elements.shape[1] != 4:
            raise InvalidConfigError("elements must have shape (m, 4)")
        if mesh.elements.size and (mesh.elements.min() < 0 or mesh.elements.max() >= mesh.n_nodes):
            raise InvalidConfigError("element references a node outside the mesh")

        bad = np.nonzero(np.any(MeshService.corner_jacobians(mesh.node_coords, mesh.elements) <= 0.0, axis=1))[0]
        if bad.size:
            raise InvalidConfigError(f"element {int(bad[0])}: non-positive corner Jacobian")

        boundary = {(int(e), int(k)) for e, k in mesh.boundary_edges()}
        for name, edges in mesh.edge_sets.items():
            if edges.size == 0:
                continue
            if edges[:, 0].min() < 0 or edges[:, 0].max() >= mesh.n_elements:
                raise InvalidConfigError(f"edge set '{name}' references a missing element")
            if edges[:, 1].min() < 0 or edges[:, 1].max() > 3:
                raise InvalidConfigError(f"edge set '{name}' has a local edge outside 0..3")
            for e, k in edges:
                if (int(e), int(k)) not in boundary:
                    raise InvalidConfigError(
                        f"edge set '{name}': local edge {int(k)} of element {int(e)} is not a boundary edge"
                    )

    @staticmethod
    def build_dofmap(
        mesh: Mesh2D,
        dofs_per_node: int,
        interface_set: str,
        field: str = "",
        coupled_components: Optional[Sequence[int]] = None,
    ) -> DofMap:
        """Split the field's dofs into interior and interface sets.

        Only `coupled_components` of interface nodes go to Γ (default: all
        components); fluid pressure on the interface stays interior.
        """
        _check_counts(dofs_per_node=dofs_per_node)
        nodes = mesh.edge_nodes(interface_set)
        comps = tuple(range(dofs_per_node)) if coupled_components is None else tuple(coupled_components)
        if any(c < 0 or c >= dofs_per_node for c in comps):
            raise InvalidConfigError(f"coupled components {comps} outside 0..{dofs_per_node - 1}")

        n_dofs = mesh.n_nodes * dofs_per_node
        gamma = (nodes[:, None] * dofs_per_node + np.asarray(comps, dtype=np.int64)[None, :]).ravel()
        gamma = np.sort(gamma)
        mask = np.ones(n_dofs, dtype=bool)
        mask[gamma] = False
        return DofMap(
            field=field,
            n_nodes=mesh.n_nodes,
            dofs_per_node=dofs_per_node,
            interface_nodes=nodes,
            interface_dofs=gamma.astype(np.int64),
            interior_dofs=np.nonzero(mask)[0].astype(np.int64),
            coupled_components=comps,
        )

    @staticmethod
    def save_mesh(mesh: Mesh2D, path: Union[str, Path]) -> None:
        lines: List[str] = [MESH_HEADER, f"nodes {mesh.n_nodes}"]
        lines += [f"{x!r} {y!r}" for x, y in mesh.node_coords.tolist()]
        lines.append(f"elems {mesh.n_elements}")
        lines += [" ".join(str(int(n)) for n in conn) for conn in mesh.elements]
        for name, edges in mesh.edge_sets.items():
            lines.append(f"edgeset {name} {len(edges)}")
            lines += [f"{int(e)} {int(k)}" for e, k in edges]
        Path(path).write_text("\n".join(lines) + "\n")
        logger.debug(f"Saved mesh with {mesh.n_nodes} nodes to {path}")

    @staticmethod
    def load_mesh(path: Union[str, Path]) -> Mesh2D:
        """Parse a `mesh2d v1` file; any defect raises MeshParseError with its line."""
        numbered = MeshService._content_lines(Path(path).read_text().splitlines())
        cursor = iter(numbered)
        last_line = numbered[-1][0] if numbered else 0

        def take() -> Tuple[int, List[str]]:
            try:
                return next(cursor)
            except StopIteration:
                raise MeshParseError("unexpected end of file", line=last_line + 1) from None

        line_no, tokens = take()
        if " ".join(tokens) != MESH_HEADER:
            raise MeshParseError(f"expected header '{MESH_HEADER}'", line=line_no)

        n_nodes = MeshService._section_count(take(), "nodes")
        coords = np.empty((n_nodes, 2))
        for i in range(n_nodes):
            line_no, tokens = take()
            coords[i] = MeshService._parse_numbers(tokens, 2, float, line_no)

        n_elems = MeshService._section_count(take(), "elems")
        elements = np.empty((n_elems, 4), dtype=np.int64)
        elem_lines = np.empty(n_elems, dtype=np.int64)
        for e in range(n_elems):
            line_no, tokens = take()
            conn = MeshService._parse_numbers(tokens, 4, int, line_no)
            if min(conn) < 0 or max(conn) >= n_nodes:
                raise MeshParseError(f"element {e} references missing node", line=line_no)
            elements[e] = conn
            elem_lines[e] = line_no

        edge_sets: Dict[str, np.ndarray] = {}
        for line_no, tokens in cursor:
            if len(tokens) != 3 or tokens[0] != "edgeset":
                raise MeshParseError("expected 'edgeset <name> <count>'", line=line_no)
            name = tokens[1]
            if name in edge_sets:
                raise MeshParseError(f"duplicate edge set '{name}'", line=line_no)
            count = MeshService._parse_numbers(tokens[2:], 1, int, line_no)[0]
            if count < 0:
                raise MeshParseError("negative edge count", line=line_no)
            edges = np.empty((count, 2), dtype=np.int64)
            for k in range(count):
                line_no, tokens = take()
                elem, local = MeshService._parse_numbers(tokens, 2, int, line_no)
                if not 0 <= elem < n_elems or not 0 <= local <= 3:
                    raise MeshParseError(f"edge ({elem}, {local}) outside the mesh", line=line_no)
                edges[k] = (elem, local)
            edge_sets[name] = edges

        bad = np.nonzero(np.any(MeshService.corner_jacobians(coords, elements) <= 0.0, axis=1))[0]
        if bad.size:
            raise MeshParseError("non-positive corner Jacobian", line=int(elem_lines[bad[0]]))

        mesh = Mesh2D(node_coords=coords, elements=elements, edge_sets=edge_sets)
        try:
            MeshService.validate_mesh(mesh)
        except InvalidConfigError as exc:
            raise MeshParseError(exc.detail, line=last_line) from exc
        return mesh

    @staticmethod
    def _content_lines(raw: Iterable[str]) -> List[Tuple[int, List[str]]]:
        out = []
        for number, text in enumerate(raw, start=1):
            tokens = text.split("#", 1)[0].split()
            if tokens:
                out.append((number, tokens))
        return out

    @staticmethod
    def _section_count(entry: Tuple[int, List[str]], keyword: str) -> int:
        line_no, tokens = entry
        if len(tokens) != 2 or tokens[0] != keyword:
            raise MeshParseError(f"expected '{keyword} <count>'", line=line_no)
        count = MeshService._parse_numbers(tokens[1:], 1, int, line_no)[0]
        if count < 0:
            raise MeshParseError(f"negative {keyword} count", line=line_no)
        return count

    @staticmethod
    def _parse_numbers(tokens: List[str], expected: int, kind, line_no: int) -> list:
        if len(tokens) != expected:
            raise MeshParseError(f"expected {expected} values, got {len(tokens)}", line=line_no)
        try:
            return [kind(t) for t in tokens]
        except ValueError:
            raise MeshParseError(f"cannot parse {tokens}", line=line_no) from None


mesh_service = MeshService()
