"""sepkit: separation losses, projection filtering, mixture synthesis,
SI-SNR evaluation, and MUSHRA/MUSHIRA listening studies."""

__version__ = "0.1.0"
