from jacobi_anosov.config.logging import get_logger

logger = get_logger(__name__)


COMMANDS = [
    ("jacobi", "Solve a, d and dbar on the window; write the solution table and the stable data"),
    ("stable", "Construct the stable and unstable solutions and their horizon history"),
    ("riccati", "Compare u = a'/a with the coth envelope"),
    ("bounds", "Grid-check every Riccati comparison bound, growth threshold and tail mass"),
    ("rates", "Estimate the contraction rate phi(s) ~ a exp(-c s) over a sampled family"),
    ("check-anosov", "Evaluate the Anosov conditions over a sampled geodesic family"),
    ("trace", "Trace one geodesic of a conformal chart"),
]


def run_pipeline(command: str, context: dict) -> dict:
    from jacobi_anosov.pipeline.main_functions import (
        build_family,
        collect_anosov_report,
        collect_bound_reports,
        collect_jacobi_tables,
        collect_rates,
        collect_riccati_table,
        collect_stable_tables,
        collect_trace_table,
        compute_a,
        compute_stable_data,
        load_surface,
        prepare_output,
        require_no_conjugate_points,
        resolve_profile,
        run_check,
    )
    from jacobi_anosov.pipeline.reporting import write_config_used, write_outputs

    setup = [prepare_output, write_config_used, load_surface]
    single = [resolve_profile, compute_a]
    stable = [require_no_conjugate_points, compute_stable_data]

    # Stage functions per command, in order
    command_stages = {
        "jacobi": single + stable + [collect_jacobi_tables],
        "stable": single + stable + [collect_stable_tables],
        "riccati": single + [collect_riccati_table],
        "bounds": single + stable + [collect_bound_reports],
        "rates": [build_family, run_check, collect_rates],
        "check-anosov": [build_family, run_check, collect_anosov_report],
        "trace": [collect_trace_table],
    }
    if command not in command_stages:
        raise KeyError(f"unknown command {command!r}")

    stages = setup + command_stages[command] + [write_outputs]
    context["command"] = command

    for stage in stages:
        stage_name = stage.__name__
        logger.info(f"Running {stage_name}...")

        # Each stage accepts and returns the shared context
        context = stage(context=context)

        logger.info(f"{stage_name} done.")

    return context
