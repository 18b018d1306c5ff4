from .resources import fc_spec, run_records, solid_image, tiny_spec

__all__ = ["fc_spec", "run_records", "solid_image", "tiny_spec"]
