"""Describing an urn: activities, random replacements, balance and tenability.

Run with ``python3 notebooks/01_urn_specs.py``.
"""

from polyaurn import corpus
from polyaurn.urn_core import (
    ReplacementDistribution,
    UrnSpec,
    check_balanced,
    dumps_spec,
    intensity_matrix,
    static_tenability_check,
)

# The classical urn: draw a ball, put it back with one more of its colour.
polya = UrnSpec.deterministic(activities=(1, 1), vectors=[(1, 0), (0, 1)], initial=(1, 1))
print("classical urn:", check_balanced(polya), "/", static_tenability_check(polya))
print(intensity_matrix(polya))

# Replacements may be random. Here a white draw adds two white or two black
# balls with equal odds, while a black draw always adds two black.
xi_white = ReplacementDistribution.from_atoms([(0.5, (2, 0)), (0.5, (0, 2))])
mixed = UrnSpec((1, 1), (xi_white, ReplacementDistribution.deterministic((0, 2))), (1, 1))
print("\nrandom replacements:", check_balanced(mixed))
print("A =\n", intensity_matrix(mixed))

# Removing balls is allowed as long as the urn can never run dry. Taking one
# ball of the drawn colour away is always possible.
removal = UrnSpec.deterministic((1, 1), [(-1, 2), (0, 1)], (3, 1))
print("\nremoval urn:", static_tenability_check(removal))
# Taking two away can hit a negative count from an odd start.
risky = UrnSpec.deterministic((1, 1), [(-2, 3), (0, 1)], (1, 1))
print("risky urn:", static_tenability_check(risky))

# An unbalanced urn adds a different total activity depending on the draw.
print("\nunbalanced example:", check_balanced(corpus.load("unbalanced")))

# Specs are stored as JSON; the bundled examples live in polyaurn.corpus.
print("\nbundled urns:", ", ".join(corpus.NAMES))
print(dumps_spec(corpus.load("three_colour")))
