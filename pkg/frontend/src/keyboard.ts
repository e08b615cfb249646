/** Keyboard-first judging: y / n answer the focused image, u steps back. */

export interface JudgeKeyHandlers {
  onYes: () => void;
  onNo: () => void;
  onUndo: () => void;
}

export function bindJudgeKeys(
  target: Pick<EventTarget, "addEventListener" | "removeEventListener">,
  handlers: JudgeKeyHandlers,
): () => void {
  const onKeyDown = (event: Event): void => {
    const key = event as KeyboardEvent;
    const element = key.target as { tagName?: string } | null;
    if (element?.tagName === "INPUT" || element?.tagName === "TEXTAREA") {
      return; // never steal keys from a text field
    }
    switch (key.key) {
      case "y":
      case "Y":
        key.preventDefault();
        handlers.onYes();
        break;
      case "n":
      case "N":
        key.preventDefault();
        handlers.onNo();
        break;
      case "u":
      case "U":
      case "Backspace":
        key.preventDefault();
        handlers.onUndo();
        break;
      default:
        break;
    }
  };
  target.addEventListener("keydown", onKeyDown);
  return () => target.removeEventListener("keydown", onKeyDown);
}
