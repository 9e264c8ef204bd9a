"""Plan a generation campaign and render its split-screen prompts.

Quotas say how many images each class still needs; the planner groups the
neediest species into fixed subsets (never more than five per prompt) and
sizes batches between 50 and 100. Every assignment is reproducible from
its seed.
"""

from regenforge.promptgen import (
    build_zero_shot_prompt,
    default_attribute_space,
    plan_generation,
    render_prompt,
)
from regenforge.taxonomy import default_taxonomy

taxonomy = default_taxonomy()
space = default_attribute_space()

quotas = {"Pine": 120, "Canada Yew": 80, "Yellow Birch": 60, "Bog Labrador Tea": 55}
plan = plan_generation(quotas, taxonomy, space, seed=7)
print(f"{len(plan.batches)} batches, {plan.total_images()} prompts planned")
for i, batch in enumerate(plan.batches):
    names = ", ".join(c.name for c in batch.species_subset)
    print(f"  batch {i}: {batch.batch_size:>3} prompts for [{names}]")

prompt = render_prompt(plan.batches[0].assignments[0], taxonomy)
print("\nfirst prompt of batch 0:\n")
print(prompt.text)
print("batch palette:")
for colour in prompt.palette_fragment:
    print(f"  {colour.label:<28} {colour.colour_name:<12} {colour.rgb} -> class {colour.class_id}")

# The zero-shot variant asks a generator to segment an existing photo.
zero_shot = build_zero_shot_prompt(taxonomy, [taxonomy.by_name("Pine"), taxonomy.by_name("Moss")])
print("\nzero-shot prompt for two classes:\n")
print(zero_shot.text)
