/**
 * Action enablement derived from the server's transition table (GET /spec),
 * so the UI can never issue a request the state machine would reject.
 */

export type StageName = "generate" | "mask" | "refine" | "inpaint" | "score";

export const STAGE_EVENTS: Record<StageName, string> = {
  generate: "ImageGenerated",
  mask: "MaskSet",
  refine: "PromptRefined",
  inpaint: "Inpainted",
  score: "Scored",
};

export const ALL_STAGES = Object.keys(STAGE_EVENTS) as StageName[];

export type TransitionTable = Record<string, Record<string, string>>;

/**
 * Stages whose event is legal from ``state``. The mask stage is also enabled
 * from a state offering RestartMask (the iterate-again loop): the server's
 * mask stage applies RestartMask followed by MaskSet in that case.
 */
export function deriveEnabledStages(transitions: TransitionTable, state: string): StageName[] {
  const outgoing = transitions[state] ?? {};
  return ALL_STAGES.filter((stage) => {
    if (STAGE_EVENTS[stage] in outgoing) return true;
    return stage === "mask" && "RestartMask" in outgoing;
  });
}

export function isStageEnabled(
  transitions: TransitionTable,
  state: string,
  stage: StageName,
): boolean {
  return deriveEnabledStages(transitions, state).includes(stage);
}
