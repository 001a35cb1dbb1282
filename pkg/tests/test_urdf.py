import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import asset_corpus, asset_models, storage_furniture
from skillforge.errors import (DanglingLinkRef, DuplicateName, InvalidValue, KinematicCycle, MalformedXml,
                               MissingLimits, UrdfError)
from skillforge.geometry import Pose
from skillforge.physics import box_mesh, build_rigid_asset
from skillforge.urdf import (AssetModel, Geometry, InertialProps, Joint, Link, PhysicalParams, describe_asset,
                             emit_urdf, parse_urdf)

BOX_URDF = """<robot name="Box">
  <link name="body">
    <inertial><mass value="0.2"/><inertia ixx="1e-3" ixy="0" ixz="0" iyy="2e-3" iyz="0" izz="3e-3"/></inertial>
    <visual><geometry><box size="0.1 0.1 0.1"/></geometry></visual>
  </link>
</robot>"""


def test_microwave_parses(microwave_urdf_text):
    m = parse_urdf(microwave_urdf_text)
    assert [link.name for link in m.links] == ["body", "door", "handle"]
    revolute = [j for j in m.joints if j.kind == "revolute"]
    assert len(revolute) == 1
    door = m.joint("door-joint")
    assert door.limits == (0.0, 1.0)
    assert m.root_link == "body"


def test_vendor_tags_are_ignored(microwave_urdf_text):
    assert "<transmission" in microwave_urdf_text
    parse_urdf(microwave_urdf_text)


def test_single_link_no_joints():
    m = parse_urdf(BOX_URDF)
    assert len(m.links) == 1 and m.joints == () and m.root_link == "body"
    assert m.link("body").inertial.mass == 0.2


def test_dangling_child_named(microwave_urdf_text):
    bad = microwave_urdf_text.replace('<child link="door"/>', '<child link="dor"/>')
    with pytest.raises(DanglingLinkRef) as e:
        parse_urdf(bad)
    assert e.value.link == "dor"
    assert "dor" in str(e.value)


def test_missing_limits():
    xml = """<robot name="A"><link name="a"/><link name="b"/>
      <joint name="j" type="revolute"><parent link="a"/><child link="b"/><axis xyz="0 0 1"/></joint></robot>"""
    with pytest.raises(MissingLimits):
        parse_urdf(xml)


def test_duplicate_and_cycle():
    dup = '<robot name="A"><link name="a"/><link name="a"/></robot>'
    with pytest.raises(DuplicateName):
        parse_urdf(dup)
    cyc = """<robot name="A"><link name="a"/><link name="b"/><link name="c"/>
      <joint name="j1" type="fixed"><parent link="b"/><child link="c"/></joint>
      <joint name="j2" type="fixed"><parent link="c"/><child link="b"/></joint></robot>"""
    with pytest.raises(KinematicCycle):
        parse_urdf(cyc)


def test_invalid_axis_and_limits():
    with pytest.raises(InvalidValue):
        Joint("j", "revolute", "a", "b", (0, 0, 0), Pose(), (0, 1))
    with pytest.raises(InvalidValue):
        Joint("j", "prismatic", "a", "b", (1, 0, 0), Pose(), (1, 0))
    j = Joint("j", "continuous", "a", "b", (0, 0, 2), Pose(), (0, 1))
    assert j.limits is None and np.isclose(np.linalg.norm(j.axis), 1.0, atol=1e-9)


def test_inertial_rejects_non_physical():
    with pytest.raises(InvalidValue):
        InertialProps(1.0, (0, 0, 0), ((1, 0, 0), (0, 1, 0), (0, 0, 3)))  # 1 + 1 < 3
    with pytest.raises(InvalidValue):
        InertialProps(-1.0)


def test_emit_single_link():
    asset = parse_urdf(BOX_URDF)
    text = emit_urdf(asset)
    assert text.count("<link ") == 1
    assert 'value="0.2"' in text
    assert 'ixx="0.001"' in text and 'iyy="0.002"' in text and 'izz="0.003"' in text


def test_fixed_joint_has_no_limit(microwave_urdf_text):
    text = emit_urdf(parse_urdf(microwave_urdf_text))
    fixed = re.search(r'<joint name="handle-joint" type="fixed">.*?</joint>', text, re.S).group(0)
    assert "<limit" not in fixed
    revolute = re.search(r'<joint name="door-joint" type="revolute">.*?</joint>', text, re.S).group(0)
    assert "<limit" in revolute


def test_microwave_round_trip(microwave_urdf_text):
    m = parse_urdf(microwave_urdf_text)
    assert parse_urdf(emit_urdf(m)).isclose(m, 1e-9)


@pytest.mark.parametrize("asset", asset_corpus(), ids=lambda a: a.name)
def test_corpus_round_trip(asset):
    assert parse_urdf(emit_urdf(asset)).isclose(asset, 1e-9)


@settings(max_examples=150)
@given(asset_models())
def test_round_trip_property(asset):
    again = parse_urdf(emit_urdf(asset))
    assert again.isclose(asset, 1e-9)
    assert len(again.joints) == len(again.links) - 1


def test_rigid_asset_round_trip():
    params = PhysicalParams(0.2, (0.11, 0.07, 0.045), "Avocado")
    asset = build_rigid_asset("Avocado", box_mesh(), params)
    again = parse_urdf(emit_urdf(asset))
    assert again.isclose(asset, 1e-9)
    assert again.physical.category == "Avocado"


@settings(max_examples=300)
@given(st.binary(max_size=400))
def test_parse_never_panics_on_bytes(data):
    try:
        parse_urdf(data)
    except UrdfError:
        pass


@settings(max_examples=300)
@given(st.data())
def test_parse_never_panics_on_mutations(microwave_urdf_text, data):
    text = microwave_urdf_text
    for _ in range(data.draw(st.integers(1, 4))):
        i = data.draw(st.integers(0, len(text) - 1))
        op = data.draw(st.sampled_from(["delete", "insert", "replace"]))
        junk = data.draw(st.text(alphabet='<>/"= abcxyz0123456789.-e', max_size=6))
        if op == "delete":
            text = text[:i] + text[i + len(junk) + 1:]
        elif op == "insert":
            text = text[:i] + junk + text[i:]
        else:
            text = text[:i] + junk + text[i + len(junk):]
    try:
        m = parse_urdf(text)
    except UrdfError:
        return
    assert len(m.joints) == len(m.links) - 1


def test_describe_microwave(microwave_urdf_text):
    text = describe_asset(parse_urdf(microwave_urdf_text))
    assert "parts: [body, door, handle]" in text
    assert "door-joint (revolute), range [0, 1]" in text


def test_describe_rigid():
    asset = build_rigid_asset("Avocado", box_mesh(), PhysicalParams(0.2, (0.11, 0.07, 0.045), "Avocado"))
    text = describe_asset(asset)
    assert "asset: Avocado" in text and "joints: none" in text


def test_describe_two_joints_in_order():
    text = describe_asset(storage_furniture())
    joint_lines = [line for line in text.splitlines() if line.strip().startswith("- ")]
    assert len(joint_lines) == 2
    assert "drawer-joint (prismatic)" in joint_lines[0]
    assert "door-joint (revolute)" in joint_lines[1]


@given(asset_models())
def test_describe_is_pure(asset):
    assert describe_asset(asset) == describe_asset(asset)
    assert describe_asset(asset) == describe_asset(parse_urdf(emit_urdf(asset)))


def test_asset_model_rejects_forest():
    with pytest.raises(InvalidValue):
        AssetModel("A", (Link("a"), Link("b")), ())
    with pytest.raises(InvalidValue):
        Geometry("mesh", (1, 1, 1))
