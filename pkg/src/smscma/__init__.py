"""Link-level simulation of uplink spatial-modulation SCMA (SM-SCMA)."""

from .complexity import OpCount, formula_fcsd, formula_mpa, formula_msud, formula_sud, survival_probability
from .decoders import (DECODERS, FCSDecoder, MLDecoder, MPADecoder, MSUDecoder, SUDecoder,
                       build_tree_levels, make_decoder, ore_energy_order)
from .model import (CodebookSet, ConfigError, IndicatorMatrix, SystemConfig, derive_factor_graph,
                    load_codebooks, load_config, resolve_codebooks, spectral_efficiency)
from .signal import (ChannelRealization, ReceivedSignal, UserMessage, demap_bits, draw_channel,
                     map_bits, transmit_and_receive)
from .harness import run_nom, run_sweep

__version__ = "0.1.0"
