import { describe, expect, it } from "vitest";

import { deriveEnabledStages, isStageEnabled, type TransitionTable } from "../src/transitions.js";

/** The pipeline's legal transition relation, as served by GET /spec. */
const TRANSITIONS: TransitionTable = {
  Created: { ImageGenerated: "Generated" },
  Generated: { MaskSet: "Masked" },
  Masked: { MaskSet: "Masked", PromptRefined: "Refined" },
  Refined: { Inpainted: "Inpainted" },
  Inpainted: { Scored: "Scored" },
  Scored: { RestartMask: "Masked" },
};

describe("enablement mirror", () => {
  // table-driven: for each pipeline state, the set of enabled UI actions
  // equals the legal transition set
  const expected: Array<[string, string[]]> = [
    ["Created", ["generate"]],
    ["Generated", ["mask"]],
    ["Masked", ["mask", "refine"]],
    ["Refined", ["inpaint"]],
    ["Inpainted", ["score"]],
    ["Scored", ["mask"]],
  ];

  it.each(expected)("state %s enables exactly %j", (state, stages) => {
    expect(deriveEnabledStages(TRANSITIONS, state).sort()).toEqual([...stages].sort());
  });

  it("disabled actions are exactly the complement", () => {
    for (const [state, stages] of expected) {
      const enabled = new Set(stages);
      for (const stage of ["generate", "mask", "refine", "inpaint", "score"] as const) {
        expect(isStageEnabled(TRANSITIONS, state, stage)).toBe(enabled.has(stage));
      }
    }
  });

  it("unknown states enable nothing", () => {
    expect(deriveEnabledStages(TRANSITIONS, "Nonsense")).toEqual([]);
  });
});
