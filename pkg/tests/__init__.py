"""Initialize tests directory."""
