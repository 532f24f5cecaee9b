import numpy as np
import pytest

from backend.app.services.clique_service import CliqueSet, independent_maximal_cliques
from backend.app.services.structure_service import (
    FactorStructure,
    SingletonPolicy,
    canonical_key,
    canonicalize,
    cliques_to_structure,
    permute_columns,
    same_structure,
    unique_child_report,
)
from backend.app.utils.errors import StructureError

from .conftest import eq5_structure


def test_cliques_to_structure_eq5():
    S = cliques_to_structure(CliqueSet(5, ((0, 1, 2), (2, 3, 4))))
    assert S.d == 2
    assert S.support == {(0, 0), (1, 0), (2, 0), (2, 1), (3, 1), (4, 1)}
    assert S.parents(2) == {0, 1}
    assert S.children(1) == (2, 3, 4)


def test_empty_clique_set_is_noise_model():
    S = cliques_to_structure(CliqueSet(4, ()))
    assert S.d == 0 and S.support == frozenset()


def test_singleton_policy():
    C = CliqueSet(3, ((0,), (1, 2)))
    dropped = cliques_to_structure(C, SingletonPolicy.DROP)
    kept = cliques_to_structure(C, "keep")
    assert dropped.d == 1 and dropped.support == {(1, 0), (2, 0)}
    assert kept.d == 2 and (0, 0) in kept.support
    assert not dropped.parents(0)


def test_unique_child_report_eq5():
    report = unique_child_report(eq5_structure())
    assert report.unique == ((0, 1), (3, 4))
    assert report.holds


def test_unique_child_report_independent_cluster():
    S = FactorStructure.from_child_sets(6, [(0, 1), (2, 3), (4, 5)])
    report = unique_child_report(S)
    assert report.unique == tuple(S.child_sets())
    assert report.holds
    assert S.is_independent_cluster()


def test_unique_child_fails_for_nested_children():
    S = FactorStructure.from_child_sets(4, [(0, 1, 2, 3), (1, 2)])
    report = unique_child_report(S)
    assert report.unique[1] == ()
    assert not report.holds


def test_canonical_form_ignores_column_order():
    S = eq5_structure()
    swapped = permute_columns(S, [1, 0])
    assert swapped != S
    assert canonicalize(swapped) == canonicalize(S)
    assert canonical_key(swapped) == canonical_key(S)


def test_canonicalize_is_idempotent():
    S = canonicalize(eq5_structure())
    assert canonicalize(S) == S


def test_random_permutations_share_a_canonical_form():
    rng = np.random.default_rng(7)
    mask = rng.uniform(size=(12, 4)) < 0.4
    mask[np.arange(4), np.arange(4)] = True
    S = FactorStructure.from_loadings(mask.astype(float))
    forms = {canonicalize(permute_columns(S, rng.permutation(4).tolist())) for _ in range(3)}
    assert len(forms) == 1
    assert same_structure(S, forms.pop())


def test_empty_factor_rejected():
    with pytest.raises(StructureError):
        FactorStructure(4, 2, frozenset({(0, 0), (1, 0)}))


def test_out_of_range_support_rejected():
    with pytest.raises(StructureError):
        FactorStructure(3, 1, frozenset({(3, 0)}))


def test_d_at_least_p_is_not_estimable():
    S = FactorStructure.from_child_sets(2, [(0,), (1,)])
    assert not S.is_estimable
    assert FactorStructure(2, 0).is_estimable
    assert FactorStructure.from_child_sets(3, [(0, 1), (1, 2)]).is_estimable


def test_json_form():
    S = eq5_structure()
    payload = S.to_dict()
    assert payload["support"][0] == [0, 0]
    assert FactorStructure.from_dict(payload) == S
    with pytest.raises(StructureError):
        FactorStructure.from_dict({"p": 3})


@pytest.mark.parametrize(
    "children",
    [
        [(0, 1, 2), (2, 3, 4)],
        [(0, 1, 2), (3, 4, 5), (6, 7)],
    ],
)
def test_population_round_trip(children):
    p = max(max(c) for c in children) + 1
    S = FactorStructure.from_child_sets(p, children)
    recovered = cliques_to_structure(independent_maximal_cliques(S.edge_set()))
    assert canonicalize(recovered) == canonicalize(S)
    assert unique_child_report(recovered).holds
