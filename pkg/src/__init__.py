"""SCLC-Distill - spectral linear-counterpart CNNs, distillation and benchmarks."""
