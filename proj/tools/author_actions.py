#!/usr/bin/env python3
"""Emits the procedural action libraries in data/actions/.

Each action is a set of per-bone angle channels (degrees). A channel is a
sine oscillator {offset, amp, cycles, phase} or a keyframe list
{keys: [[phase, deg], ...]} over the normalized loop phase.

Axis convention (bone-local): x = roll about the forward axis, y = yaw,
z = pitch. For a limb segment pointing down, +z pitch swings it forward;
for a tail segment pointing back, +z pitch swings it down.

Related actions (left/right variants, a short variant of a longer action)
share a base posture and differ in small features, so the pose space
forms one region per action family.

Usage: python3 tools/author_actions.py [out_dir]
"""

import json
import os
import sys


def sine(bone, axis, offset=0.0, amp=0.0, cycles=1.0, phase=0.0):
    return {"bone": bone, "axis": axis, "offset": offset, "amp": amp,
            "cycles": cycles, "phase": phase}


def const(bone, axis, deg):
    return sine(bone, axis, offset=deg)


def keys(bone, axis, ks):
    return {"bone": bone, "axis": axis, "keys": [list(k) for k in ks]}


# ---------------------------------------------------------------------------
# macaque

M_TAIL = ["Tail Top", "Tail Upper", "Tail Upper Middle", "Tail Middle",
          "Tail Lower Middle", "Tail Lower", "Tail End"]


def m_tail(top, curl, lateral=0.0, sway=0.0, cycles=1.0):
    ch = [const("Tail Top", "z", top)]
    for b in M_TAIL[1:]:
        ch.append(const(b, "z", curl))
        if lateral:
            ch.append(const(b, "y", lateral))
        if sway:
            ch.append(sine(b, "y", amp=sway, cycles=cycles))
    return ch


def m_gait(amp, cycles, knee=0.5, offset_front=0.0, offset_hind=0.0):
    """Diagonal-pair gait: left hind with right fore, and vice versa."""
    ch = []
    for side, ph in (("Left", 0.0), ("Right", 180.0)):
        ch.append(sine(f"{side} Knee", "z", offset_hind, amp, cycles, ph))
        ch.append(sine(f"{side} Ankle", "z", -amp * knee, amp * knee, cycles, ph + 90))
        ch.append(sine(f"{side} Humerus", "z", offset_front, amp, cycles, ph + 180))
        ch.append(sine(f"{side} Hand", "z", amp * knee, amp * knee, cycles, ph + 270))
    return ch


def m_actions():
    acts = []

    def add(name, duration, channels):
        acts.append({"name": name, "duration": duration, "channels": channels})

    # Walk: level body, head up, J-shaped tail hooking upward.
    add("Walk", 4.0,
        m_gait(22, 4) + m_tail(30, -4, lateral=22) +
        [sine("Spine Middle", "y", amp=4, cycles=4), const("Neck", "z", 15)])

    # Run family: long fast gait, flexing spine, tail raised straight back.
    run = m_gait(28, 10, knee=0.5) + m_tail(-30, 16) + [
        const("Pelvis", "z", -10),
        sine("Spine Middle", "z", amp=8, cycles=10),
        const("Neck", "z", -10)]
    add("Run", 5.0, run)
    add("Jump Run", 2.0, m_gait(30, 4, knee=0.5) + m_tail(-30, 16) + [
        sine("Spine Middle", "z", amp=8, cycles=4),
        const("Neck", "z", -10),
        sine("Pelvis", "z", amp=8, cycles=4, phase=90)])

    # Idle: head lowered, tail hanging, slow breathing.
    add("Idle", 4.0,
        m_tail(80, 6, sway=6, cycles=1) + [
            const("Neck", "z", -30),
            sine("Spine Middle", "z", 0, 2, 2),
            const("Left Ankle", "z", -10), const("Right Ankle", "z", -10)])

    # Sitting: torso upright, hind legs folded forward, tail curled on the ground.
    add("Sitting", 4.0,
        m_tail(20, 4, lateral=18) + [
            const("Pelvis", "z", 65),
            const("Left Knee", "z", 20), const("Right Knee", "z", 20),
            const("Left Ankle", "z", -120), const("Right Ankle", "z", -120),
            const("Left Humerus", "z", -50), const("Right Humerus", "z", -50),
            sine("Neck", "y", 0, 20, 1),
            const("Neck", "z", -55)])

    # Climb family: body vertical, alternating overhead reaches.
    def climb(cycles, direction, phase):
        return m_tail(-10, 12) + [
            const("Pelvis", "z", 85),
            const("Neck", "z", -70),
            sine("Left Humerus", "z", 140, 30, cycles, phase),
            sine("Right Humerus", "z", 140, 30, cycles, phase + 180),
            sine("Left Knee", "z", 60, 25, cycles, phase + 180),
            sine("Right Knee", "z", 60, 25, cycles, phase),
            const("Left Ankle", "z", -70), const("Right Ankle", "z", -70),
            const("Pelvis", "y", direction)]
    add("Climb Up", 5.0, climb(5, 0.0, 0.0))
    add("Climb Down", 2.0, climb(2, 0.0, 180.0))

    # Sideways climbing: body vertical, limbs spread, tail swept sideways.
    def climb_side(cycles, yaw):
        return m_tail(-5, 6, lateral=-22) + [
            const("Pelvis", "z", 80),
            const("Pelvis", "y", yaw),
            const("Neck", "z", -60),
            const("Neck", "y", -yaw * 2),
            const("Left Humerus", "x", -75), const("Right Humerus", "x", 75),
            sine("Left Humerus", "z", 40, 25, cycles),
            sine("Right Humerus", "z", 40, 25, cycles, 180),
            const("Left Knee", "x", -55), const("Right Knee", "x", 55),
            sine("Left Knee", "z", 40, 20, cycles, 180),
            sine("Right Knee", "z", 40, 20, cycles)]
    add("Climb Right", 5.0, climb_side(5, -8))
    add("Climb Left", 2.0, climb_side(2, 8))

    # Hit family: half-reared torso, both arms striking, one dominant.
    def hit(strong, weak):
        strike = [(0.0, 10), (0.3, 120), (0.45, 140), (0.6, 60), (1.0, 10)]
        return m_tail(35, -10, lateral=0) + [
            const("Pelvis", "z", 35),
            const("Neck", "z", -20),
            keys(f"{strong} Humerus", "z", strike),
            keys(f"{weak} Humerus", "z", [(t, v * 0.85) for t, v in strike]),
            keys(f"{strong} Hand", "z", [(0, 20), (0.35, 60), (0.6, 10), (1.0, 20)]),
            const("Left Knee", "z", 35), const("Right Knee", "z", 35),
            const("Left Ankle", "z", -60), const("Right Ankle", "z", -60)]
    add("Hit Right", 5.0, hit("Right", "Left"))
    add("Hit Left", 2.0, hit("Left", "Right"))

    # Turn family: slow walk with the tail wagging wide, head turned.
    def turn(cycles, yaw):
        return m_gait(15, cycles) + [
            const("Tail Top", "z", 60),
            const("Tail Top", "y", -yaw)] + [
            sine(b, "y", 0, 10, cycles) for b in M_TAIL[1:]] + [
            const(b, "z", -25) for b in M_TAIL[1:]] + [
            sine("Pelvis", "y", yaw, 6, 1),
            const("Neck", "y", yaw * 4),
            const("Neck", "z", -35),
            const("Pelvis", "z", 15),
            const("Spine Middle", "y", yaw)]
    add("Turn Right", 5.0, turn(4, -5))
    add("Turn Left", 2.0, turn(2, 5))

    # Jump family: crouch and extend, arms reaching forward, tail straight up.
    def jump(pitch):
        crouch = [(0.0, 30), (0.35, 50), (0.55, 0), (0.8, 15), (1.0, 30)]
        return m_tail(-75, 0) + [
            keys("Pelvis", "z", [(0.0, 0), (0.4, -5), (0.6, pitch), (1.0, 0)]),
            keys("Left Knee", "z", crouch), keys("Right Knee", "z", crouch),
            keys("Left Ankle", "z", [(t, -1.6 * max(v, 0)) for t, v in crouch]),
            keys("Right Ankle", "z", [(t, -1.6 * max(v, 0)) for t, v in crouch]),
            keys("Left Humerus", "z", [(0, 10), (0.5, 60), (0.8, 45), (1.0, 10)]),
            keys("Right Humerus", "z", [(0, 10), (0.5, 60), (0.8, 45), (1.0, 10)]),
            const("Neck", "z", 15)]
    add("Jump Forward", 5.0, jump(15))
    add("Jump Inplace", 2.0, jump(8))

    # Attack: lunging low with head thrust forward, arms reaching, tail high and curled.
    add("Attack", 4.0,
        m_tail(-60, -14) + [
            const("Pelvis", "z", -15),
            sine("Pelvis", "x", 0, 6, 3),
            const("Neck", "z", 25),
            sine("Neck", "z", 0, 12, 3),
            sine("Left Humerus", "z", 85, 20, 3),
            sine("Right Humerus", "z", 85, 20, 3, 180),
            const("Left Hand", "z", 30), const("Right Hand", "z", 30),
            const("Left Knee", "z", -25), const("Right Knee", "z", -25),
            const("Left Ankle", "z", 15), const("Right Ankle", "z", 15)])
    return acts


# ---------------------------------------------------------------------------
# horse

H_TAIL = ["Tail Top", "Tail Middle", "Tail Low", "Tail End"]
H_NECK = ["Neck Low", "Neck Middle", "Neck Top"]


def h_gait(amp, cycles, pairs="diagonal", knee=0.6):
    ch = []
    for side, ph in (("Left", 0.0), ("Right", 180.0)):
        fph = ph + (180 if pairs == "diagonal" else 0)
        ch.append(sine(f"{side} Calf", "z", 0, amp, cycles, ph))
        ch.append(sine(f"{side} Backarm", "z", 0, amp * knee, cycles, ph + 90))
        ch.append(sine(f"{side} Upperarm", "z", 0, amp, cycles, fph))
        ch.append(sine(f"{side} Foreankle", "z", amp * knee, amp * knee, cycles, fph + 270))
    return ch


def h_tail(top, curl, sway=0.0, cycles=1.0):
    ch = [const("Tail Top", "z", top)]
    for b in H_TAIL[1:]:
        ch.append(const(b, "z", curl))
        if sway:
            ch.append(sine(b, "y", 0, sway, cycles))
    return ch


def h_neck(deg, amp=0.0, cycles=1.0):
    return [sine(b, "z", deg, amp, cycles) for b in H_NECK]


def h_actions():
    acts = []

    def add(name, duration, channels):
        acts.append({"name": name, "duration": duration, "channels": channels})

    add("Walk", 5.0, h_gait(18, 4) + h_tail(15, 5, sway=5, cycles=4) + h_neck(-5, 3, 4))
    add("Gallop", 4.0, h_gait(38, 8, pairs="same") + h_tail(-20, 5) + h_neck(-12, 6, 8) +
        [sine("Penvis", "z", 0, 6, 8)])
    add("Idle", 5.0, h_tail(25, 8, sway=8, cycles=1) + h_neck(0, 4, 1) +
        [sine("Head", "y", 0, 15, 1)])
    add("Eat", 5.0, h_tail(25, 8, sway=4, cycles=2) + h_neck(-28, 5, 3) +
        [const("Head", "z", -30), const("Left Upperarm", "z", 10)])
    add("Sleep", 5.0, h_tail(40, 10) + h_neck(-15, 2, 1) + [
        const("Left Upperarm", "z", 80), const("Right Upperarm", "z", 80),
        const("Left Foreankle", "z", -150), const("Right Foreankle", "z", -150),
        const("Left Calf", "z", 70), const("Right Calf", "z", 70),
        const("Left Backankle", "z", -140), const("Right Backankle", "z", -140),
        const("Penvis", "x", 12)])
    add("Attack", 3.0, h_tail(-10, 10) + h_neck(10, 8, 3) + [
        keys("Penvis", "z", [(0, 0), (0.3, 35), (0.5, 40), (0.8, 5), (1, 0)]),
        keys("Left Upperarm", "z", [(0, 0), (0.35, 90), (0.5, 40), (0.65, 90), (1, 0)]),
        keys("Right Upperarm", "z", [(0, 0), (0.4, 80), (0.55, 30), (0.7, 85), (1, 0)]),
        const("Left Calf", "z", 20), const("Right Calf", "z", 20)])
    add("Buck", 3.0, h_tail(-35, 5) + h_neck(-20) + [
        keys("Penvis", "z", [(0, 0), (0.3, -30), (0.5, -35), (0.8, -5), (1, 0)]),
        keys("Left Calf", "z", [(0, 0), (0.35, -70), (0.5, -40), (1, 0)]),
        keys("Right Calf", "z", [(0, 0), (0.35, -75), (0.5, -35), (1, 0)]),
        const("Left Upperarm", "z", -15), const("Right Upperarm", "z", -15)])
    add("Jump", 3.0, h_tail(-30, 0) + h_neck(10) + [
        keys("Penvis", "z", [(0, 0), (0.3, 25), (0.6, -15), (1, 0)]),
        keys("Left Upperarm", "z", [(0, 0), (0.3, 100), (0.6, 20), (1, 0)]),
        keys("Right Upperarm", "z", [(0, 0), (0.3, 100), (0.6, 20), (1, 0)]),
        keys("Left Foreankle", "z", [(0, 0), (0.3, 120), (0.6, 10), (1, 0)]),
        keys("Right Foreankle", "z", [(0, 0), (0.3, 120), (0.6, 10), (1, 0)]),
        keys("Left Calf", "z", [(0, 0), (0.3, -30), (0.6, -60), (1, 0)]),
        keys("Right Calf", "z", [(0, 0), (0.3, -30), (0.6, -60), (1, 0)])])
    add("Jump Run", 4.0, h_gait(34, 6, pairs="same") + h_tail(-30, 0) + h_neck(5, 6, 6) +
        [sine("Penvis", "z", 0, 15, 6, 90)])
    add("Swim", 4.0, h_gait(30, 4, pairs="diagonal", knee=0.9) + h_tail(-5, 0, sway=10, cycles=4) +
        h_neck(18) + [const("Penvis", "z", 15), const("Head", "z", -25)])
    add("Falling", 3.0, h_tail(-45, -10) + h_neck(-20, 10, 2) + [
        keys("Penvis", "x", [(0, 0), (0.5, 60), (1, 90)]),
        sine("Left Upperarm", "z", 30, 40, 3), sine("Right Upperarm", "z", 30, 40, 3, 120),
        sine("Left Calf", "z", 0, 35, 3, 60), sine("Right Calf", "z", 0, 35, 3, 200)])
    add("Death", 4.0, h_tail(60, 5) + [
        keys("Penvis", "x", [(0, 0), (0.4, 50), (0.7, 88), (1, 90)]),
        keys("Neck Low", "z", [(0, 0), (0.5, -20), (1, -35)]),
        keys("Neck Middle", "z", [(0, 0), (0.5, -15), (1, -20)]),
        keys("Left Upperarm", "z", [(0, 0), (0.5, 40), (1, 20)]),
        keys("Right Calf", "z", [(0, 0), (0.5, 30), (1, 15)])])
    return acts


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "data", "actions")
    for species, acts in (("macaque", m_actions()), ("horse", h_actions())):
        doc = {"version": 1, "species": species, "actions": acts}
        with open(os.path.join(out, f"{species}.json"), "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
