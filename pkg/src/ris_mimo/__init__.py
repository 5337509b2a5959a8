"""RIS-assisted massive MIMO uplink simulator."""
