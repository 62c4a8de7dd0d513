from .schedule import LatencyTable, ScheduleConstraintSet, StageSchedule, region_of, schedule_block
from .validate import ProgramSchedule, effective_ii, region_occupancy, schedule_program, storage_map, validate_schedule

__all__ = [
    "LatencyTable", "ScheduleConstraintSet", "StageSchedule", "region_of", "schedule_block", "ProgramSchedule",
    "effective_ii", "region_occupancy", "schedule_program", "storage_map", "validate_schedule",
]
