"""Level sets, separated nets, mixed norms, scaling sweeps and persistence."""
