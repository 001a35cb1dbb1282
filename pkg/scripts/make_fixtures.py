"""Write the replay-cache fixtures for the bundled scenes.

Each fixture is keyed by the hash of the exact request `skillforge tasks
generate` builds for that scene with default settings, so rerun this script
whenever prompt wording, asset descriptions or defaults change.
"""
import os

from skillforge.cli import PipelineConfig, data_path
from skillforge.llm import assemble_prompt, render_messages, write_cache
from skillforge.scene import load_scene_manifest

MICROWAVE_RESPONSE = """\
Here is a task for the microwave scene.

Task: OpenMicrowaveDoor
Description: Open the microwave door by pulling on its handle.
Subtask 1: open-door
Description: Grasp the handle and swing the door to its fully open position.
```reward
(reward (term 1.0 (dist-ee Microwave.handle))
        (term 1.0 (joint-err Microwave.door-joint 1.0))
        (term 1.0 (grasped Microwave.handle)))
(success (joint-near Microwave.door-joint 1.0 0.05))
```
"""

# Mixed response: one valid long-horizon task, one whose joint target is out of range,
# one that names a joint that does not exist.
CUP_MICROWAVE_RESPONSE = """\
**Task:** PutCupInMicrowave
**Description:** Open the microwave, pick up the cup and place it inside.

### Subtask 1: open-door
Description: Grasp the microwave handle and swing the door fully open.
```reward
(reward (term 1.0 (dist-ee Microwave.handle)) (term 1.0 (joint-err Microwave.door-joint 1.0)) (term 1.0 (grasped Microwave.handle)))
(success (joint-near Microwave.door-joint 1.0 0.05))
```
### Subtask 2: pick-cup
Description: Release the handle, reach the cup and grasp it.
```reward
(reward (term 1.0 (dist-ee Cup.body)) (term 1.0 (grasped Cup.body)))
(success (grasped Cup.body))
```
### Subtask 3: place-cup
Description: Carry the cup into the microwave cavity.
```reward
(reward (term 1.0 (dist-ee Microwave.body)) (term 1.0 (dist-ee Cup.body)))
(success (grasped Cup.body) (ee-near Microwave.body 0.05))
```

**Task:** OpenMicrowaveWide
**Description:** Open the door past its usual stop.

### Subtask 1: open-wide
```reward
(reward (term 1.0 (dist-ee Microwave.handle)) (term 1.0 (joint-err Microwave.door-joint 1.5)))
(success (joint-near Microwave.door-joint 1.5 0.05))
```

**Task:** CloseMicrowaveDoor
**Description:** Push the door closed.

### Subtask 1: close-door
```reward
(reward (term 1.0 (dist-ee Microwave.handle)) (term 1.0 (joint-err Microwave.dor-joint 0.0)))
(success (joint-near Microwave.dor-joint 0.0 0.05))
```
"""

FIXTURES = {
    "microwave.json": MICROWAVE_RESPONSE,
    "cup_microwave.json": CUP_MICROWAVE_RESPONSE,
}


def main():
    cfg = PipelineConfig()
    out = data_path("fixtures")
    os.makedirs(out, exist_ok=True)
    for scene_file, response in FIXTURES.items():
        scene, _ = load_scene_manifest(data_path("scenes", scene_file))
        request = render_messages(assemble_prompt(scene), cfg.model_id, cfg.temperature)
        path = write_cache(out, request, response)
        print(f"{scene_file} -> {os.path.relpath(path)}")


if __name__ == "__main__":
    main()
