"""horient: horizontal normals, characteristic points and orientability in H^n."""

from __future__ import annotations

from horient.calculus import (
    ComposedField,
    DerivativeUnavailableError,
    FrameDerivativeField,
    OpaqueField,
    PolynomialField,
    PolynomialParseError,
    ScalarField,
    directional_derivative,
    horizontal_gradient,
    load_polynomial,
    parse_polynomial,
)
from horient.exterior import (
    MultiForm,
    MultiVector,
    contact_form,
    hodge,
    pair,
    pair_coordinate_vectors,
    pair_frame_vectors,
)
from horient.fig import Fig, Maker
from horient.group import (
    Automorphism,
    Dilation,
    DimensionMismatchError,
    FrameVector,
    GroupElement,
    LeftTranslation,
    apply_automorphism,
    change_basis,
    group_inv,
    group_mul,
    identity,
    koranyi_distance,
    koranyi_norm,
)
from horient.orientability import (
    InvarianceReport,
    OrientabilityReport,
    SeamTransport,
    degenerate_set_check,
    invariance_audit,
    normal_convert,
    orientability_verdict,
    tangent_frame,
    tangent_frame_residuals,
    volume_form,
)
from horient.pprinting import pformat, pprint
from horient.surfaces import (
    CharacteristicPoint,
    CharacteristicPointError,
    CharacteristicSearch,
    LevelSetSurface,
    MobiusStrip,
    ParametrizedPatch,
    Seam,
    catalog_surface,
    find_characteristic_points,
    levelset_horizontal_normal,
    make_mobius,
    patch_normal,
    patch_tangents,
)
from horient.transformed import TransformedPatch, transform_patch


__all__ = [
    "Automorphism",
    "CharacteristicPoint",
    "CharacteristicPointError",
    "CharacteristicSearch",
    "ComposedField",
    "DerivativeUnavailableError",
    "Dilation",
    "DimensionMismatchError",
    "Fig",
    "FrameDerivativeField",
    "FrameVector",
    "GroupElement",
    "InvarianceReport",
    "LeftTranslation",
    "LevelSetSurface",
    "Maker",
    "MobiusStrip",
    "MultiForm",
    "MultiVector",
    "OpaqueField",
    "OrientabilityReport",
    "ParametrizedPatch",
    "PolynomialField",
    "PolynomialParseError",
    "ScalarField",
    "Seam",
    "SeamTransport",
    "TransformedPatch",
    "apply_automorphism",
    "catalog_surface",
    "change_basis",
    "contact_form",
    "degenerate_set_check",
    "directional_derivative",
    "find_characteristic_points",
    "group_inv",
    "group_mul",
    "hodge",
    "horizontal_gradient",
    "identity",
    "invariance_audit",
    "koranyi_distance",
    "koranyi_norm",
    "levelset_horizontal_normal",
    "load_polynomial",
    "make_mobius",
    "normal_convert",
    "orientability_verdict",
    "pair",
    "pair_coordinate_vectors",
    "pair_frame_vectors",
    "parse_polynomial",
    "patch_normal",
    "patch_tangents",
    "pformat",
    "pprint",
    "tangent_frame",
    "tangent_frame_residuals",
    "transform_patch",
    "volume_form",
]
