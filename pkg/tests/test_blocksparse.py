import numpy as np
import pytest

from sparsemur.blocksparse import BlockStructure, block_mur_step, block_stats
from sparsemur.exceptions import ValidationError
from sparsemur.priors import PriorSpec, weight_matrix
from sparsemur.snnls import mur_step


def test_contiguous_and_round_trip():
    b = BlockStructure.contiguous(7, 3)
    assert b.to_list() == [[0, 1, 2], [3, 4, 5], [6]]
    assert BlockStructure.from_list(b.to_list()) == b
    assert b.n == 7 and b.n_blocks == 3


@pytest.mark.parametrize("groups", [[], [[0], []], [[0, 1], [1, 2]], [[0, 2]], [[1, 2]]])
def test_invalid_groups(groups):
    with pytest.raises(ValidationError):
        BlockStructure(groups)


def test_block_stats_broadcast(rng):
    b = BlockStructure([[0, 3], [1], [2, 4]])
    H = rng.random((5, 2))
    l2 = block_stats(H, b, "l2sq")
    l1 = block_stats(H, b, "l1")
    np.testing.assert_allclose(l2[0], H[0] ** 2 + H[3] ** 2)
    np.testing.assert_allclose(l2[3], l2[0])
    np.testing.assert_allclose(l1[4], H[2] + H[4])
    with pytest.raises(ValidationError):
        block_stats(H, b, "linf")
    with pytest.raises(ValidationError):
        b.stats(np.ones((4, 1)), "l1")


def test_singleton_blocks_reduce_to_scalar(rng):
    b = BlockStructure.contiguous(6, 1)
    H = rng.random((6, 3)) + 0.1
    np.testing.assert_array_equal(
        weight_matrix(PriorSpec("block_rst", 0.2, blocks=b), H), weight_matrix(PriorSpec("rst", 0.2), H)
    )
    np.testing.assert_array_equal(
        weight_matrix(PriorSpec("block_rgdp", 0.2, blocks=b), H), weight_matrix(PriorSpec("rgdp", 0.2), H)
    )


def test_block_step_matches_general_step(rng):
    b = BlockStructure.contiguous(6, 2)
    W = rng.random((5, 6))
    X = rng.random((5, 2))
    H = rng.random((6, 2)) + 0.1
    p = PriorSpec("block_rgdp", 0.3, blocks=b)
    out = block_mur_step(W, X, H, b, p, 0.1)
    ref = mur_step(W, X, H, weight_matrix(p, H), 1, 0.1)
    np.testing.assert_array_equal(out, ref)
    with pytest.raises(ValidationError):
        block_mur_step(W, X, H, b, PriorSpec("rgdp"), 0.1)
    with pytest.raises(ValidationError):
        block_mur_step(W, X, H, BlockStructure.contiguous(6, 3), p, 0.1)
