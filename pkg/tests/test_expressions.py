"""Polynomial expression grammar for inline models."""
from __future__ import annotations

import numpy as np
import pytest

from reflectmv.expressions import ExpressionError, compile_expression, compile_matrix, compile_vector


def test_polynomial_evaluation():
    fn = compile_expression("-2*(x1 - 1) + 0.5*x2**3 - t/4", 2)
    X = np.array([[0.0, 2.0], [1.0, -1.0]])
    np.testing.assert_allclose(fn(2.0, X), [2.0 + 4.0 - 0.5, -0.5 - 0.5])


def test_constant_broadcasts():
    fn = compile_expression("3", 1)
    np.testing.assert_array_equal(fn(0.0, np.zeros((4, 1))), [3.0] * 4)


def test_vector_and_matrix():
    v = compile_vector(["x1", "x1*x2"], 2)
    m = compile_matrix([["1", "0"], ["0", "x2"]], 2)
    X = np.array([[2.0, 3.0]])
    np.testing.assert_array_equal(v(0.0, X), [[2.0, 6.0]])
    np.testing.assert_array_equal(m(0.0, X), [[[1.0, 0.0], [0.0, 3.0]]])


@pytest.mark.parametrize(
    "text",
    ["__import__('os')", "x3", "x1**0.5", "x1/x2", "sin(x1)", "x1**-1", "lambda: 1", "x1.real", ""],
)
def test_rejected_expressions(text):
    with pytest.raises(ExpressionError):
        compile_expression(text, 2)


def test_vector_length_must_match():
    with pytest.raises(ExpressionError):
        compile_vector(["x1"], 2)
