"""
core/errors.py
Hiérarchie des exceptions du laboratoire autonome
"""

from typing import Optional


class GoniolabError(Exception):
    """Erreur de base du projet"""


class ConfigInvalid(GoniolabError):
    """Configuration (YAML ou JSON) invalide ou incomplète"""


# =============================================================================
# FORMULATIONS / DECK
# =============================================================================

class FormulationError(GoniolabError):
    pass


class UnknownReagent(FormulationError):
    pass


class ConcentrationExceedsStock(FormulationError):
    pass


class VolumeOverflow(FormulationError):
    pass


class SubPipettableVolume(FormulationError):
    pass


class MissingPrice(FormulationError):
    pass


class StageFull(FormulationError):
    """Plus aucun emplacement libre sur le porte-échantillons"""


# =============================================================================
# IMAGES
# =============================================================================

class ImagingError(GoniolabError):
    pass


class EmptyImage(ImagingError):
    pass


class ImageTooSmall(ImagingError):
    pass


class InvertedImage(ImagingError):
    """Le fond n'est pas clair : rétroéclairage absent ou image inversée"""


class RoiOutOfBounds(ImagingError):
    pass


class DegenerateHistogram(ImagingError):
    pass


class NoForeground(ImagingError):
    pass


class NoBaselineFound(ImagingError):
    pass


class AmbiguousContact(ImagingError):
    pass


# =============================================================================
# GÉOMÉTRIE
# =============================================================================

class GeometryError(GoniolabError):
    pass


class StepTooLarge(GeometryError):
    pass


class CollinearPoints(GeometryError):
    pass


class ExcessiveTilt(GeometryError):
    pass


class FitDiverged(GeometryError):
    pass


class DegenerateArc(GeometryError):
    pass


# =============================================================================
# OPTIMISEUR
# =============================================================================

class OptimizerError(GoniolabError):
    pass


class EmptySpace(OptimizerError):
    pass


class SpaceTooLarge(OptimizerError):
    pass


class LengthMismatch(OptimizerError):
    pass


class SingularCovariance(OptimizerError):
    pass


class SpaceExhausted(OptimizerError):
    pass


class UnknownFormulation(OptimizerError):
    pass


class DuplicateResult(OptimizerError):
    pass


# =============================================================================
# LABORATOIRE VIRTUEL
# =============================================================================

class LabError(GoniolabError):
    pass


class UnknownComponent(LabError):
    pass


class DropletOutOfFrame(LabError):
    pass


class LabFault(LabError):
    """Échec d'une expérience côté laboratoire"""


# =============================================================================
# PROTOCOLE / STATISTIQUES
# =============================================================================

class ProtocolError(GoniolabError):
    pass


class SchemaViolation(ProtocolError):
    """Message non conforme ; `path` désigne le champ fautif"""

    def __init__(self, path: str, detail: Optional[str] = None):
        self.path = path
        self.detail = detail
        message = path if not detail else f"{path}: {detail}"
        super().__init__(message)


class StatsError(GoniolabError):
    pass


class EmptyInput(StatsError):
    pass


class InvalidSampleSize(StatsError):
    pass
