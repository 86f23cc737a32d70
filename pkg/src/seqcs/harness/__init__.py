"""Config loading, experiment runners and the ``seqcs`` command line."""
