"""Prompt texts for the external analyzer and perturbation backends.

These strings are wire contracts: they are sent byte-for-byte, with the
single documented substitution slot in the perturbation prompt. Golden
tests pin them.
"""

ANALYSIS_PROMPT = """Analyze the robot navigation paths shown in this floor plan and provide:

- Success assessment: Did the robot complete its navigation task successfully?
- Intermediate concerns: What issues or risks occurred during navigation (e.g., close proximity to obstacles, narrow clearances, suboptimal routing)?
- Targeted adaptations: What specific improvements or training scenarios should be implemented to address these concerns?"""

ANALYSIS_SLOT = "[analysis from F]"

PERTURB_PROMPT_TEMPLATE = """Analysis of agent's trajectory.
[analysis from F]

Given the analysis of the agent's trajectory, make the environment more challenging for object navigation.

Select ONE object visible in the scene and propose a single move (change in x, y coordinates) that:
- Creates navigation challenges based on the analysis suggestions
- Maintains realism (objects in plausible locations)
- Stays within apartment bounds
Use the `propose_move_instruction` function to specify the move.

Constraints:
- Apartment uses normalized 100x100 grid (x:[0,100], y:[0,100])
- Example: sofa at x=27, y=5, rotation=0
- Keep objects inside walls
- Don't block doorways completely (but can reduce clearances)
- Avoid overlapping with other objects"""


def perturb_prompt(analysis_text: str) -> str:
    """Fill the single substitution slot with the analyzer's output."""
    return PERTURB_PROMPT_TEMPLATE.replace(ANALYSIS_SLOT, analysis_text)


VERIFY_PROMPT_TEMPLATE = """The previous scene edit intended to: {intent}.
Look at the updated floor plan and answer with a single word, yes or no:
did the change achieve its intended effect?"""


def verify_prompt(intent: str) -> str:
    return VERIFY_PROMPT_TEMPLATE.format(intent=intent)
