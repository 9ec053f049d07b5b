import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle as O
from emitgraph import pauli as pl
from emitgraph.errors import ValidationError
from emitgraph.graph import (
    Graph,
    complete_graph,
    grid_graph,
    local_complement,
    partition_adjacency,
    path_graph,
    preparation_circuit,
    random_graph,
    stabilizer_generators,
    star_graph,
    two_chains,
)
from emitgraph.schedule import GateStep
from emitgraph.sim import run_dense, run_stabilizer


@st.composite
def graphs(draw, min_n=1, max_n=7):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(range(n), [p for p, keep in zip(pairs, mask) if keep])


def edge_set(g):
    return set(g.edges())


class TestGraphBasics:
    def test_duplicate_ids(self):
        with pytest.raises(ValidationError):
            Graph([1, 1])

    def test_self_edge(self):
        with pytest.raises(ValidationError):
            Graph([0, 1], [(1, 1)])

    def test_adjacency_symmetric(self):
        g = Graph([3, 5, 9], [(3, 9), (5, 9)])
        a = g.adjacency()
        assert np.array_equal(a, a.T) and not a.diagonal().any()
        assert g.neighbors(9) == [3, 5]

    def test_key_round_trip(self):
        g = two_chains((3, 4))
        assert Graph.from_key(g.key(), g.ids).same_edges(g)

    def test_json_round_trip(self):
        g = Graph([0, 1, 2], [(0, 2)], ["emitter", "photon", "nuclear"])
        text = g.to_json()
        assert json.loads(text) == {
            "edges": [[0, 2]],
            "vertices": [{"id": 0, "role": "emitter"}, {"id": 1, "role": "photon"}, {"id": 2, "role": "nuclear"}],
        }
        back = Graph.from_json(text)
        assert back == g and back.roles == g.roles

    @pytest.mark.parametrize(
        "doc",
        [
            {"vertices": [{"id": 0}, {"id": 1}], "edges": [[1, 0]]},
            {"vertices": [{"id": 0}, {"id": 1}], "edges": [[0, 1], [0, 1]]},
            {"vertices": [{"id": 0}], "edges": [[0, 0]]},
            {"vertices": [{"id": 0, "role": "wizard"}], "edges": []},
            {"edges": []},
        ],
    )
    def test_json_rejects(self, doc):
        with pytest.raises(ValidationError):
            Graph.from_dict(doc)

    def test_dot(self):
        dot = Graph([0, 1], [(0, 1)], ["emitter", "photon"]).to_dot()
        assert dot.startswith("graph G {") and "0 -- 1;" in dot and "doublecircle" in dot


class TestLocalComplement:
    def test_path_to_triangle(self):
        g = Graph([1, 2, 3], [(1, 2), (2, 3)])
        assert edge_set(local_complement(g, 2)) == {(1, 2), (2, 3), (1, 3)}

    def test_star_to_complete(self):
        g = star_graph(3)
        assert local_complement(g, 0).same_edges(complete_graph(4))

    def test_unknown_vertex(self):
        with pytest.raises(ValidationError):
            local_complement(path_graph(3), 7)

    @given(graphs(), st.data())
    def test_involution_and_roles(self, g, data):
        v = data.draw(st.sampled_from(g.ids))
        h = local_complement(g, v)
        assert local_complement(h, v) == g
        assert h.ids == g.ids and h.roles == g.roles

    @given(graphs(max_n=6), st.data())
    def test_matches_direct_toggle(self, g, data):
        v = data.draw(st.sampled_from(g.ids))
        nb = g.neighbors(v)
        expect = edge_set(g) ^ {tuple(sorted(p)) for p in itertools.combinations(nb, 2)}
        assert edge_set(local_complement(g, v)) == expect

    @given(graphs(max_n=6), st.data())
    def test_equals_local_rotations(self, g, data):
        # RotX(pi/2) on v and RotZ(-pi/2) on each neighbour map |G> to |LC_v G>
        v = data.draw(st.sampled_from(g.ids))
        s = preparation_circuit(g)
        s.steps.append(GateStep.rx(g.pos(v), np.pi / 2))
        for u in g.neighbors(v):
            s.steps.append(GateStep.rz(g.pos(u), -np.pi / 2))
        t, _ = run_stabilizer(s)
        t2, _ = run_stabilizer(preparation_circuit(local_complement(g, v)))
        assert t.same_state(t2)


class TestStabilizerGenerators:
    def test_single_vertex(self):
        assert stabilizer_generators(Graph([1])) == [pl.PauliString.from_str("X")]

    def test_edge(self):
        assert stabilizer_generators(Graph([1, 2], [(1, 2)])) == [pl.PauliString.from_str(s) for s in ("XZ", "ZX")]

    def test_two_chain_vertex_six(self):
        g = two_chains((5, 6))
        gen = stabilizer_generators(g)[g.pos(6)]
        expect = {g.pos(6): "X", g.pos(4): "Z", g.pos(8): "Z", g.pos(5): "Z"}
        assert gen == pl.PauliString.from_letters(expect, 8)

    @given(graphs())
    def test_pairwise_commute(self, g):
        gens = stabilizer_generators(g)
        assert all(a.commutes(b) for a, b in itertools.combinations(gens, 2))

    @given(graphs(max_n=6))
    def test_match_definition_state(self, g):
        vec = O.graph_state(len(g), [(g.pos(a), g.pos(b)) for a, b in g.edges()])
        for gen in stabilizer_generators(g):
            m = O.pauli(gen.letters)
            assert np.allclose(m @ vec, vec)


class TestPreparationCircuit:
    def test_empty_graph(self):
        s = preparation_circuit(Graph([0, 1, 2]))
        assert [st.kind for st in s.steps] == ["new_qubit"] * 3
        assert all(st.state == "+" for st in s.steps)

    def test_triangle(self):
        g = complete_graph(3)
        s = preparation_circuit(g)
        assert [st.kind for st in s.steps].count("cz") == 3
        t, _ = run_stabilizer(s)
        assert all(t.expectation(p) == 1 for p in stabilizer_generators(g))

    def test_edge_amplitudes(self):
        st_, _ = run_dense(preparation_circuit(Graph([1, 2], [(1, 2)])))
        assert np.allclose(st_.vector(), np.array([1, 1, 1, -1]) / 2)

    @given(graphs(max_n=6))
    def test_dense_matches_definition(self, g):
        st_, _ = run_dense(preparation_circuit(g))
        vec = O.graph_state(len(g), [(g.pos(a), g.pos(b)) for a, b in g.edges()])
        assert O.equal_up_to_phase(st_.vector(), vec)


class TestPartition:
    def test_everything_in_part0(self):
        g = path_graph(4)
        p = partition_adjacency(g, g.ids)
        assert np.array_equal(p.n0, g.adjacency()) and p.n01.size == 0

    def test_two_chain_cross_block(self):
        p = partition_adjacency(two_chains(), {4, 5, 6, 7, 8})
        assert p.cross_edges() == [(2, 4), (3, 5)]

    def test_non_subset(self):
        with pytest.raises(ValidationError):
            partition_adjacency(path_graph(3), {0, 9})

    def test_reassembly_random(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            g = random_graph(10, 0.4, rng)
            part0 = [v for v in g.ids if rng.random() < 0.5]
            p = partition_adjacency(g, part0)
            order = [g.pos(v) for v in p.part0 + p.part1]
            assert np.array_equal(p.reassemble(), g.adjacency()[np.ix_(order, order)])


class TestFamilies:
    def test_grid_edge_count(self):
        assert grid_graph((4, 4)).num_edges() == 24
        assert grid_graph((3, 3, 3)).num_edges() == 54

    def test_two_chains_degree(self):
        g = two_chains()
        assert g.num_edges() == 6 and g.degree(1) == 1 and g.degree(5) == 2
