from langchain_core.prompts import PromptTemplate

from ..dataset.records import ContextMode

TASK_LINE = (
    "Task: Decide whether to use generation or retrieval for this image's geolocalization."
)

# Template lines in presentation order, keyed by the context they need
QUERY_LINE = "Query: <image:{query_id}>"
GENERATION_LINE = "Generation-based Prediction: ({generation})"
RETRIEVAL_LINE = "Retrieval-based Prediction: ({retrieval}) <image:{top1_image}>"
CANDIDATES_LINE = "Other Retrieved Candidate Coordinates: [{others}]"


def format_coordinate(coordinate):
    """Coordinates are printed as ``lat, lon`` with six decimals (about 0.1 m)."""
    return f"{coordinate.lat:.6f}, {coordinate.lon:.6f}"


def build_prompt_template(mode=ContextMode.FULL):
    """Prompt template for a context mode; ablated parts are left out entirely."""
    mode = ContextMode(mode)
    lines = [TASK_LINE, QUERY_LINE]
    if mode.uses_generation:
        lines.append(GENERATION_LINE)
    if mode.uses_retrieval:
        lines.append(RETRIEVAL_LINE)
    if mode.uses_candidates:
        lines.append(CANDIDATES_LINE)
    template = "\n".join(lines)
    return PromptTemplate(
        input_variables=[
            v
            for v in ("query_id", "generation", "retrieval", "top1_image", "others")
            if "{" + v + "}" in template
        ],
        template=template,
    )


def render_prompt(record, mode=ContextMode.FULL):
    """
    Render the routing prompt of a record as text.

    Images are out of reach here, so the query image is shown as a placeholder
    carrying the record id and the top-1 retrieved image as a placeholder
    carrying the candidate rank.
    """
    prompt = build_prompt_template(mode)
    top1_image = f"{record.id}/candidate-1" if record.candidates else "none"
    others = ", ".join(
        f"({format_coordinate(c.coordinate)})" for c in record.candidates[1:]
    )
    values = {
        "query_id": record.id,
        "generation": format_coordinate(record.pred_generation),
        "retrieval": format_coordinate(record.pred_retrieval),
        "top1_image": top1_image,
        "others": others,
    }
    return prompt.format(**{k: values[k] for k in prompt.input_variables})
