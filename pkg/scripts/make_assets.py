"""Regenerate the bundled cup asset, the avocado demo mesh, and the demo scene manifests."""
import json
import os

from skillforge.physics import build_rigid_asset, cylinder_mesh, icosphere, scale_mesh_to_size, write_obj
from skillforge.urdf import PhysicalParams, emit_urdf

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "skillforge", "data")


def main():
    assets = os.path.join(DATA, "assets")
    params = PhysicalParams(0.25, (0.08, 0.08, 0.1), "Cup")
    mesh = scale_mesh_to_size(cylinder_mesh(0.5, 1.0, 24), params.size)
    write_obj(mesh, os.path.join(assets, "cup.obj"))
    cup = build_rigid_asset("Cup", mesh, params, mesh_filename="cup.obj")
    with open(os.path.join(assets, "cup.urdf"), "w", encoding="utf-8") as f:
        f.write(emit_urdf(cup))

    # unit-size ellipsoid; `skillforge assets build` rescales it to a sampled size
    avocado = scale_mesh_to_size(icosphere(0.5, 3), (1.0, 0.65, 0.45))
    os.makedirs(os.path.join(DATA, "meshes"), exist_ok=True)
    write_obj(avocado, os.path.join(DATA, "meshes", "avocado.obj"))

    scenes = os.path.join(DATA, "scenes")
    microwave = {"urdf": "../assets/microwave.urdf", "xyz": [0.55, 0.0, 0.25], "rpy": [0.0, 0.0, 0.0]}
    cup_entry = {"urdf": "../assets/cup.urdf", "xyz": [0.2, -0.2, 0.1], "rpy": [0.0, 0.0, 0.0]}
    for name, entries in (("microwave", [microwave]), ("cup_microwave", [microwave, cup_entry])):
        manifest = {"seed": 1, "robot_base": {"xyz": [0.0, 0.0, 0.0], "rpy": [0.0, 0.0, 0.0]},
                    "assets": entries}
        with open(os.path.join(scenes, f"{name}.json"), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")


if __name__ == "__main__":
    main()
