"""Graded lambda calculus: grade algebras, graded typing, resource-aware evaluation."""

from grlc.algebra import Grade, GradeAlgebra, build_algebra, check_laws

__all__ = ["Grade", "GradeAlgebra", "build_algebra", "check_laws"]
