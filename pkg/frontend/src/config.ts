import type { UiConfig } from "./types.js";

export const DEFAULT_CONFIG: UiConfig = {
  gatewayBaseUrl: "",
  disclosureBanner:
    "You're chatting with an AI support assistant, not a human therapist. " +
    "It can make mistakes and is not a substitute for professional care.",
  crisisFooter:
    "If you are in crisis, call or text 988 (US), dial your local emergency " +
    "number, or find helplines at befrienders.org.",
  preSendNotice:
    "This is not professional therapy. Please reach out to a licensed " +
    "provider for serious or ongoing concerns.",
};

/** Merge an injected config object over the defaults; the banner must stay non-empty. */
export function resolveConfig(overrides: Partial<UiConfig> = {}): UiConfig {
  const config = { ...DEFAULT_CONFIG, ...overrides };
  if (!config.disclosureBanner.trim()) {
    throw new Error("disclosure banner text must be non-empty");
  }
  return config;
}
