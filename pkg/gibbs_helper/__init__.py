from .config import config, load_document
from .errors import GibbsumError, PipelineError, ValidationError
from .estimator import (
    EstimateReport, EstimatorConfig, estimate_ratio_classical,
    estimate_ratio_product)
from .experiment import (
    ExperimentConfig, RunRecord, count_colorings, run_experiment)
from .models import (
    IsingModel, LookupHamiltonian, PottsModel, exact_partition_function,
    load_model)
from .qsim import AEBackend, QuantumConfig, estimate_ratio_quantum
from .sampling import Sampler, SamplerConfig
from .schedule import (
    CoolingSchedule, generate_schedule_classical, verify_schedule)
