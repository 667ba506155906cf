"""Long-horizon ConvLSTM video prediction with multi-resolution recurrence and an energy-based critic."""
