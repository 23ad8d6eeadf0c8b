"""Joint activity detection and channel estimation for RIS-assisted grant-free access."""
