"""Mesh and degree-of-freedom layout."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from dualfsi.core.exceptions import UnknownEdgeSetError

# local edge k joins corner k to corner k+1 (mod 4)
LOCAL_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Bilinear quadrilateral mesh with named edge sets.

    node_coords: (n_nodes, 2) float array
    elements: (n_elems, 4) int array, corners counter-clockwise
    edge_sets: name -> (k, 2) int array of (element, local edge)
    """

    node_coords: np.ndarray
    elements: np.ndarray
    edge_sets: Dict[str, np.ndarray] = field(default_factory=dict)
    dim: int = 2

    @property
    def n_nodes(self) -> int:
        return int(self.node_coords.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    def edge_set(self, name: str) -> np.ndarray:
        if name not in self.edge_sets:
            raise UnknownEdgeSetError(f"Unknown edge set '{name}'")
        return self.edge_sets[name]

    def edge_node_pairs(self, name: str) -> np.ndarray:
        """(k, 2) node ids of each edge in the set, in element orientation."""
        edges = self.edge_set(name)
        if edges.size == 0:
            return np.zeros((0, 2), dtype=np.int64)
        local = np.asarray(LOCAL_EDGES)[edges[:, 1]]
        conn = self.elements[edges[:, 0]]
        rows = np.arange(len(edges))
        return np.stack([conn[rows, local[:, 0]], conn[rows, local[:, 1]]], axis=1)

    def edge_nodes(self, name: str) -> np.ndarray:
        """Sorted unique node ids touched by an edge set."""
        return np.unique(self.edge_node_pairs(name))

    def boundary_edges(self) -> np.ndarray:
        """(k, 2) (element, local edge) pairs of edges owned by a single element."""
        local = np.asarray(LOCAL_EDGES)
        a = self.elements[:, local[:, 0]].ravel()
        b = self.elements[:, local[:, 1]].ravel()
        keys = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
        _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        owned = np.nonzero(counts[inverse.ravel()] == 1)[0]
        return np.stack([owned // 4, owned % 4], axis=1)

    def element_areas(self) -> np.ndarray:
        """Shoelace areas of all elements."""
        xy = self.node_coords[self.elements]
        x, y = xy[..., 0], xy[..., 1]
        return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)

    def diameter(self) -> float:
        span = self.node_coords.max(axis=0) - self.node_coords.min(axis=0)
        return float(np.hypot(*span))


@dataclass(frozen=True, eq=False)
class DofMap:
    """Node-major dof numbering split into interior (I) and interface (Γ) sets.

    Global dof of (node, component) is node * dofs_per_node + component. Both index
    sets are sorted ascending, so Γ is ordered by node id, then component.
    """

    field: str
    n_nodes: int
    dofs_per_node: int
    interface_nodes: np.ndarray
    interface_dofs: np.ndarray
    interior_dofs: np.ndarray
    coupled_components: Tuple[int, ...] = (0, 1)

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dofs_per_node

    @property
    def n_interface(self) -> int:
        return int(self.interface_dofs.size)

    @property
    def n_interior(self) -> int:
        return int(self.interior_dofs.size)

    def dof(self, node, component):
        return np.asarray(node) * self.dofs_per_node + component

    def node_dofs(self, nodes, components=None) -> np.ndarray:
        """Global dofs of the given nodes, node-major."""
        comps = range(self.dofs_per_node) if components is None else components
        nodes = np.asarray(nodes, dtype=np.int64)
        return (nodes[:, None] * self.dofs_per_node + np.asarray(list(comps))[None, :]).ravel()

    def interior_position(self) -> np.ndarray:
        """Map global dof -> position within I (or -1)."""
        pos = -np.ones(self.n_dofs, dtype=np.int64)
        pos[self.interior_dofs] = np.arange(self.n_interior)
        return pos

    def interface_position(self) -> np.ndarray:
        """Map global dof -> position within Γ (or -1)."""
        pos = -np.ones(self.n_dofs, dtype=np.int64)
        pos[self.interface_dofs] = np.arange(self.n_interface)
        return pos
