"""JSON wire formats: game descriptions, profiles, beliefs.

The game schema mirrors the in-memory layout: ``types``, ``priors``,
``horizon``, ``initial_state`` and a ``stages`` array whose entries
carry ``states``, ``actions1``, ``actions2``, ``payoffs1``/``payoffs2``
nested as [state][a1][a2][type1][type2], an optional ``mask`` and a
``transition`` array [state][a1][a2] of next-state labels.  Loading is
permissive about normalization problems (they surface later through
validate_game); structural impossibilities raise.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .core import (BeliefSystem, FiniteDistribution, MalformedInputError,
                   MultiStageGame, NodeKey, PayoffTensor, StageGame,
                   StrategyProfile)


def game_to_dict(game: MultiStageGame) -> dict[str, Any]:
    stages = []
    for k, st in enumerate(game.stages):
        transition = [[[st.next_states[int(st.transition_table[x, a1, a2])]
                        for a2 in range(st.m2)] for a1 in range(st.m1)]
                      for x in range(st.n_states)]
        stages.append({
            "states": list(st.states),
            "actions1": list(st.actions1),
            "actions2": list(st.actions2),
            "payoffs1": st.payoff1.values.tolist(),
            "payoffs2": st.payoff2.values.tolist(),
            "mask": {
                "player1": st.payoff1.feasible.tolist(),
                "player2": st.payoff2.feasible.tolist(),
            },
            "transition": transition,
            "next_states": list(st.next_states),
        })
    return {
        "types": {"defender": list(game.types1), "user": list(game.types2)},
        "priors": {
            "about_defender": np.asarray(game.prior_about_1.weights).tolist(),
            "about_user": np.asarray(game.prior_about_2.weights).tolist(),
        },
        "horizon": game.horizon,
        "initial_state": game.initial_state,
        "stages": stages,
    }


def _stage_from_dict(k: int, raw: dict, next_states: list[str] | None,
                     n1: int, n2: int) -> StageGame:
    states = [str(s) for s in raw["states"]]
    actions1 = [str(a) for a in raw["actions1"]]
    actions2 = [str(a) for a in raw["actions2"]]
    p1 = np.asarray(raw["payoffs1"], dtype=float)
    p2 = np.asarray(raw["payoffs2"], dtype=float)
    S, m1, m2 = len(states), len(actions1), len(actions2)
    expected = (S, m1, m2, n1, n2)
    if p1.shape != expected or p2.shape != expected:
        raise MalformedInputError(
            f"stage {k}: payoff shape {p1.shape}/{p2.shape} != {expected}")
    mask = raw.get("mask") or {}
    f1 = np.asarray(mask.get("player1", np.ones((S, n1, m1))), dtype=bool)
    f2 = np.asarray(mask.get("player2", np.ones((S, n2, m2))), dtype=bool)

    trans_labels = raw["transition"]
    if next_states is None:
        declared = raw.get("next_states")
        if declared is not None:
            next_states = [str(s) for s in declared]
        else:
            seen: list[str] = []
            for row in trans_labels:
                for col in row:
                    for label in col:
                        if str(label) not in seen:
                            seen.append(str(label))
            next_states = seen
    index = {s: i for i, s in enumerate(next_states)}
    table = np.zeros((S, m1, m2), dtype=int)
    for x in range(S):
        for a1 in range(m1):
            for a2 in range(m2):
                label = str(trans_labels[x][a1][a2])
                if label not in index:
                    # keep the label visible as a dangling target
                    index[label] = len(next_states)
                    next_states = next_states + [label]
                table[x, a1, a2] = index[label]
    return StageGame(k, tuple(states), tuple(actions1), tuple(actions2),
                     PayoffTensor(p1, f1), PayoffTensor(p2, f2),
                     table, tuple(next_states))


def game_from_dict(raw: dict[str, Any]) -> MultiStageGame:
    try:
        types1 = tuple(str(t) for t in raw["types"]["defender"])
        types2 = tuple(str(t) for t in raw["types"]["user"])
        priors = raw["priors"]
        horizon = int(raw["horizon"])
        stages_raw = raw["stages"]
        initial_state = str(raw["initial_state"])
    except (KeyError, TypeError) as err:
        raise MalformedInputError(f"game description missing field: {err}") from None
    stages = []
    n1, n2 = len(types1), len(types2)
    for k, st_raw in enumerate(stages_raw):
        nxt = [str(s) for s in stages_raw[k + 1]["states"]] if k + 1 < len(stages_raw) else None
        stages.append(_stage_from_dict(k, st_raw, nxt, n1, n2))
    return MultiStageGame(
        horizon=horizon, stages=tuple(stages), types1=types1, types2=types2,
        prior_about_1=FiniteDistribution.unchecked(priors["about_defender"]),
        prior_about_2=FiniteDistribution.unchecked(priors["about_user"]),
        initial_state=initial_state)


def load_game(path: str) -> MultiStageGame:
    with open(path, "r", encoding="utf-8") as fh:
        return game_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Profiles and beliefs.
# ---------------------------------------------------------------------------

def profile_to_dict(game: MultiStageGame, profile: StrategyProfile) -> dict:
    out: dict[str, Any] = {"defender": [], "user": []}
    for k, st in enumerate(game.stages):
        for side, types, arrs in (("defender", game.types1, profile.sigma1),
                                  ("user", game.types2, profile.sigma2)):
            stage_map = {}
            for x, state in enumerate(st.states):
                stage_map[state] = {t: arrs[k][x, ti].tolist()
                                    for ti, t in enumerate(types)}
            out[side].append(stage_map)
    return out


def profile_from_dict(game: MultiStageGame, raw: dict) -> StrategyProfile:
    sig1, sig2 = [], []
    for k, st in enumerate(game.stages):
        for side, types, m, out in (("defender", game.types1, st.m1, sig1),
                                    ("user", game.types2, st.m2, sig2)):
            try:
                stage_map = raw[side][k]
            except (KeyError, IndexError, TypeError):
                raise MalformedInputError(
                    f"profile missing {side} entry for stage {k}") from None
            arr = np.zeros((st.n_states, len(types), m))
            for x, state in enumerate(st.states):
                per_state = stage_map.get(state)
                if per_state is None:
                    raise MalformedInputError(
                        f"profile missing state {state!r} at stage {k}")
                for ti, t in enumerate(types):
                    row = np.asarray(per_state[t], dtype=float)
                    if row.size != m:
                        raise MalformedInputError(
                            f"profile row for {side}/{t} at stage {k} state {state!r} "
                            f"has {row.size} entries, expected {m}")
                    arr[x, ti] = row
            out.append(arr)
    return StrategyProfile(tuple(sig1), tuple(sig2))


def _node_key_str(game: MultiStageGame, node: NodeKey) -> str:
    parts = []
    for k, (a1, a2) in enumerate(node):
        st = game.stages[k]
        parts.append(f"{st.actions1[a1]},{st.actions2[a2]}")
    return ";".join(parts)


def _node_key_parse(game: MultiStageGame, text: str) -> NodeKey:
    if not text:
        return ()
    node = []
    for k, part in enumerate(text.split(";")):
        a1_label, a2_label = part.split(",")
        st = game.stages[k]
        node.append((st.actions1.index(a1_label), st.actions2.index(a2_label)))
    return tuple(node)


def beliefs_to_dict(game: MultiStageGame, beliefs: BeliefSystem) -> dict:
    nodes = beliefs.nodes()
    return {
        "defender": {_node_key_str(game, n): {
            t: beliefs.belief_p1[n][ti].tolist() for ti, t in enumerate(game.types1)}
            for n in nodes},
        "user": {_node_key_str(game, n): {
            t: beliefs.belief_p2[n][ti].tolist() for ti, t in enumerate(game.types2)}
            for n in nodes},
        "off_path": {
            "defender": [_node_key_str(game, n) for n in nodes if beliefs.off_path_p1[n]],
            "user": [_node_key_str(game, n) for n in nodes if beliefs.off_path_p2[n]],
        },
        "aggregates": {
            "about_defender": [a.tolist() for a in beliefs.agg_about_1],
            "about_user": [a.tolist() for a in beliefs.agg_about_2],
            "off_path": [a.tolist() for a in beliefs.agg_off_path],
        },
        "aggregation_discrepancy": beliefs.aggregation_discrepancy,
    }


def beliefs_from_dict(game: MultiStageGame, raw: dict) -> BeliefSystem:
    bel1, bel2, off1, off2 = {}, {}, {}, {}
    off_d = set(raw.get("off_path", {}).get("defender", []))
    off_u = set(raw.get("off_path", {}).get("user", []))
    for key_str, per_type in raw["defender"].items():
        node = _node_key_parse(game, key_str)
        bel1[node] = np.stack([np.asarray(per_type[t], dtype=float)
                               for t in game.types1])
        off1[node] = key_str in off_d
    for key_str, per_type in raw["user"].items():
        node = _node_key_parse(game, key_str)
        bel2[node] = np.stack([np.asarray(per_type[t], dtype=float)
                               for t in game.types2])
        off2[node] = key_str in off_u
    agg = raw.get("aggregates", {})
    agg1 = tuple(np.asarray(a, dtype=float) for a in agg.get(
        "about_defender", [np.tile(game.prior_about_1.weights, (st.n_states, 1))
                           for st in game.stages]))
    agg2 = tuple(np.asarray(a, dtype=float) for a in agg.get(
        "about_user", [np.tile(game.prior_about_2.weights, (st.n_states, 1))
                       for st in game.stages]))
    agg_off = tuple(np.asarray(a, dtype=bool) for a in agg.get(
        "off_path", [np.zeros(st.n_states, dtype=bool) for st in game.stages]))
    return BeliefSystem(bel1, bel2, off1, off2, agg1, agg2, agg_off,
                        float(raw.get("aggregation_discrepancy", 0.0)))


def dump_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
