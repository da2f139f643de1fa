"""Capacity analysis and IQ-aware precoding for magnitude-detection MIMO links."""

from .channel import (ChannelConfig, ChannelRealization, PathComponent,
                      channel_from_json, channel_matrix, channel_to_json,
                      generate_channel, generate_reference,
                      power_for_receive_snr, receive_snr,
                      reference_gain_for_rsnr, rsnr)
from .hybrid import (AltMinTrace, DegenerateAlignmentError, HybridPrecoder,
                     fc_analog_update, fc_aux_update, fc_digital_update,
                     fc_hybrid_precoder, sc_analog_update, sc_digital_update,
                     sc_hybrid_precoder)
from .numerics import (DegenerateChannelError, NumericFailure, SvdResult,
                       WaterFillResult, from_real_stack, procrustes,
                       project_unit_modulus, real_equivalent, realify_channel,
                       svd, to_real_stack, water_fill)
from .precoding import (ClassicalPrecoder, DigitalPrecoder, achievable_rate,
                        capacity_slopes, classical_capacity, classical_precoder,
                        dof_slope, inphase_capacity, iq_capacity,
                        iq_digital_precoder, transmit_covariance)
from .receiver import (DegenerateReferenceError, LinearizedChannel, MiEstimate,
                       linearize, matched_real_noise, measure_linearized,
                       measure_magnitude, mi_linearized, mi_nonlinear_mc)

__version__ = "0.1.0"
