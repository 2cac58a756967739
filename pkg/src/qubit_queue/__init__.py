"""n-qubit sphere operations and heavy-traffic queueing limits."""
