import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lacuna.geometry import (
    CellIndex,
    DirectionSet,
    GeometryError,
    cell_index,
    cell_indices,
    cone_membership,
    dyadic_order,
    generate_equispaced,
    generate_nested_lacunary,
    generate_planar_lacunary,
    generate_product_lacunary,
    lacunarity_order,
    make_direction,
    partition_by_sector,
    sector_index,
    sigma_pairs,
    wedge_membership,
)

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@pytest.mark.parametrize("coords, expected", [
    ((2, 1), 1),      # ratio exactly 1/2 sits in the closed end of (1/4, 1/2]
    ((1, 0.3), 1),
    ((1, 0.2), 2),
    ((1, 1), 0),
    ((1, 2), -1),
    ((1, 0.25), 2),
])
def test_sector_index_examples(coords, expected):
    assert sector_index(make_direction(coords), (1, 2)) == expected


def test_sector_index_snaps_near_powers_of_two():
    v = np.array([1.0, 0.5 * (1 + 1e-15)])
    assert sector_index(v, (1, 2)) == 1


@given(st.lists(positive, min_size=2, max_size=4))
def test_sector_interval(coords):
    v = make_direction(coords)
    for j, k in sigma_pairs(v.size):
        ell = sector_index(v, (j, k))
        ratio = v[k - 1] / v[j - 1]
        assert 2.0 ** -(ell + 1) * (1 - 1e-13) < ratio <= 2.0 ** -ell * (1 + 1e-13)


@pytest.mark.parametrize("coords, labels", [
    ((2, 1), {(1, 2): 1}),
    ((4, 2, 1), {(1, 2): 1, (1, 3): 2, (2, 3): 1}),
    ((1, 1, 1), {(1, 2): 0, (1, 3): 0, (2, 3): 0}),
])
def test_cell_index_examples(coords, labels):
    cell = cell_index(make_direction(coords))
    assert cell.as_dict() == labels


def test_cell_signed_levels():
    cell = cell_index(make_direction((4, 2, 1)))
    assert cell.signed(1, 3) == 2
    assert cell.signed(3, 1) == -2
    assert cell.signed(2, 2) == 0


def test_cell_index_rejects_wrong_length():
    with pytest.raises(GeometryError):
        CellIndex(3, (0, 1))


def test_cell_indices_vectorized_matches_scalar(rng):
    V = rng.uniform(0.01, 1, size=(50, 4))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    rows = cell_indices(V)
    for v, row in zip(V, rows):
        assert tuple(row) == cell_index(v).labels


def test_partition_by_sector_examples():
    O = DirectionSet([(2, 1), (4, 1)])
    groups = partition_by_sector(O, (1, 2))
    assert sorted(groups) == [1, 2]
    assert np.allclose(groups[1].vectors[0], O.vectors[0])
    assert len(partition_by_sector(DirectionSet([(1, 0.3)]), (1, 2))) == 1
    dyadic = DirectionSet([(1, 2.0 ** -l) for l in range(1, 9)])
    groups = partition_by_sector(dyadic, (1, 2))
    assert sorted(groups) == list(range(1, 9))
    assert all(len(g) == 1 for g in groups.values())


def test_direction_set_validation():
    with pytest.raises(GeometryError):
        DirectionSet([(1, 0)])
    with pytest.raises(GeometryError):
        DirectionSet([(1, -1)])
    with pytest.raises(GeometryError):
        DirectionSet([(1, 1), (2, 2)])
    with pytest.raises(GeometryError):
        DirectionSet(np.empty((0, 2)))
    with pytest.raises(GeometryError):
        DirectionSet([(1, 1)], normalize=False)


def test_direction_set_is_immutable():
    O = DirectionSet([(1, 1), (1, 2)])
    with pytest.raises(ValueError):
        O.vectors[0, 0] = 3.0


def test_direction_set_json_round_trip():
    O = generate_planar_lacunary(2, 3)
    back = DirectionSet.from_json(O.to_json(), order=2)
    assert np.allclose(back.vectors, O.vectors, rtol=0, atol=1e-15)
    with pytest.raises(GeometryError):
        DirectionSet.from_json(json.dumps({"a": 1}))


def test_declared_order_is_checked():
    with pytest.raises(GeometryError):
        DirectionSet(generate_planar_lacunary(2, 4).vectors, order=1)


@pytest.mark.parametrize("dirs, order", [
    ([(1, 0.3)], 0),
    ([(1, 2.0 ** -l) for l in range(1, 17)], 1),
    ([(1, 2.0 ** -l * (1 + 2.0 ** (-m - 4))) for l in range(1, 5) for m in range(1, 5)], 2),
])
def test_lacunarity_order_examples(dirs, order):
    assert lacunarity_order(DirectionSet(dirs), max_order=3) == order


def test_lacunarity_order_none_for_equispaced():
    assert lacunarity_order(generate_equispaced(64), max_order=2) is None


@pytest.mark.parametrize("L", [1, 2, 3])
@pytest.mark.parametrize("b", [1, 2, 4, 8])
def test_planar_generator_order(L, b):
    O = generate_planar_lacunary(L, b)
    assert len(O) == b ** L
    found = lacunarity_order(O, max_order=L)
    assert found is not None and found <= L


def test_planar_generator_examples():
    O = generate_planar_lacunary(1, 8)
    ref = DirectionSet([(1, 2.0 ** -l) for l in range(1, 9)])
    assert np.allclose(O.vectors, ref.vectors, atol=0)
    assert lacunarity_order(generate_planar_lacunary(2, 4), 2) == 2
    assert lacunarity_order(generate_planar_lacunary(1, 1), 2) == 0


def test_planar_generator_jitter_is_seeded():
    a = generate_planar_lacunary(2, 2, seed=3, jitter=1e-4)
    b = generate_planar_lacunary(2, 2, seed=3, jitter=1e-4)
    assert np.array_equal(a.vectors, b.vectors)
    with pytest.raises(GeometryError):
        generate_planar_lacunary(2, 2, jitter=0.1)


def test_separation_below_minimum_rejected():
    with pytest.raises(GeometryError):
        generate_planar_lacunary(2, 2, separation=2)
    with pytest.raises(GeometryError):
        generate_nested_lacunary([[1, 2], [1, 2]], separation=3)


def test_product_generator():
    O = generate_product_lacunary(3, [[1, 2, 3], [5, 6, 7]])
    assert len(O) == 9
    assert lacunarity_order(O, 2) <= 2
    two = generate_product_lacunary(2, [list(range(1, 9))])
    assert np.allclose(two.vectors, generate_planar_lacunary(1, 8).vectors)
    with pytest.raises(GeometryError):
        generate_product_lacunary(3, [[1]])


def test_nested_generator_outer_first_prefixes():
    O = generate_nested_lacunary([[0, 1, -1, 2], [1, 2, 3]], outer_first=True)
    assert len(O) == 12
    first = cell_indices(O.vectors[:4])[:, 0]
    assert sorted(first.tolist()) == [-2, -1, 0, 1]
    assert lacunarity_order(O, 2) == 2


@given(st.data())
def test_subsets_never_raise_the_order(data):
    O = generate_planar_lacunary(2, 3)
    idx = data.draw(st.lists(st.integers(0, len(O) - 1), min_size=1, max_size=len(O), unique=True))
    assert lacunarity_order(O.subset(idx), 2) <= lacunarity_order(O, 2)


def test_equispaced_is_nested():
    a = generate_equispaced(8).vectors
    b = generate_equispaced(16).vectors
    assert np.allclose(a, b[::2])


def test_dyadic_order_is_a_permutation():
    order = dyadic_order(16)
    assert sorted(order.tolist()) == list(range(16))
    assert order[:2].tolist() == [0, 8]


@pytest.mark.parametrize("v, xi, expected", [
    ((1, 1), (1, -1), True),
    ((1, 1), (1, 1), False),
    ((4, 2, 1), (1, -2, 0), True),
])
def test_cone_membership_examples(v, xi, expected):
    assert cone_membership(np.array(xi, float), make_direction(v)) is expected


@pytest.mark.parametrize("xi, widened, expected", [
    ((-1, 1), False, True),
    ((1, 1), False, False),
    ((-2.5, 1), False, False),
    ((-2.5, 1), True, True),
])
def test_wedge_membership_examples(xi, widened, expected):
    assert wedge_membership(np.array(xi, float), (1, 2), 0, widened) is expected


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3),
       st.sampled_from([1e-6, 1.0, 1e6]))
def test_membership_homogeneous(xi, t):
    xi = np.array(xi)
    v = make_direction((3, 2, 1))
    assert cone_membership(t * xi, v) == cone_membership(xi, v)
    for sg in sigma_pairs(3):
        assert wedge_membership(t * xi, sg, 1, True) == wedge_membership(xi, sg, 1, True)
