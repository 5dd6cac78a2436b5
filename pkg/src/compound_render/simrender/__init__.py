"""Software rendering, execution and timing simulation of compound configurations."""
