// Privacy guard: the transcript must live only in page memory.
// This module is the single place allowed to *read* storage APIs, and only
// to assert that they remain empty.

export function assertBrowserStorageEmpty(): void {
  const globals = globalThis as Record<string, unknown>;
  for (const name of ["localStorage", "sessionStorage"]) {
    const store = globals[name] as { length?: number } | undefined;
    if (store && typeof store.length === "number" && store.length > 0) {
      throw new Error(`${name} is not empty; the client must not persist anything`);
    }
  }
  if (typeof document !== "undefined" && document.cookie) {
    throw new Error("cookies present; the client must not persist anything");
  }
}
