from .bapu import BapuSystem
from .coefficients import CoeffSeq, IndexSpace
from .frame import FrameSystem, ShiftedMolecules
from .grid import Grid, VectorSignal
from .weights import MatrixWeight
