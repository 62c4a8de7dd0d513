from .checks import (
    SiteInfo, Violation, check_all, check_constraints, check_ordered_loop_exit, check_program_order,
    check_wavefront_order, site_info,
)

__all__ = [
    "SiteInfo", "Violation", "check_all", "check_constraints", "check_ordered_loop_exit", "check_program_order",
    "check_wavefront_order", "site_info",
]
