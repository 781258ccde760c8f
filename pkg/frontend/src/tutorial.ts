/**
 * First-run walkthrough: four example questions, one card each.
 */

export interface TutorialExample {
  title: string;
  prompt: string;
  note: string;
}

export const TUTORIAL_EXAMPLES: TutorialExample[] = [
  {
    title: "Find a place by name",
    prompt: "Frauenkirche in Munich Old Town",
    note: "Searches every dataset for matching entities and puts them on the map. Hover a shape to see its name.",
  },
  {
    title: "Relate two kinds of objects",
    prompt: "Buildings within 100 meters of the parks in Munich Maxvorstadt",
    note: "The answer comes with a step list. Each step has a button that shows the map as it looked at that point of the analysis.",
  },
  {
    title: "Ask about the data itself",
    prompt: "what are the datasets we have?",
    note: "Questions about the database come back as text, here a listing of the available tables.",
  },
  {
    title: "Follow up with a chart",
    prompt: "Can you draw me a diagram for area distribution of buildings you searched?",
    note: "Follow-up questions can summarize the previous result, for example as an area histogram.",
  },
];

export class Tutorial {
  private readonly overlay: HTMLDivElement;
  private index = 0;

  constructor(
    root: HTMLElement,
    private readonly onTry: (prompt: string) => void,
  ) {
    this.overlay = document.createElement("div");
    this.overlay.className = "tutorial-overlay";
    this.overlay.hidden = true;
    root.appendChild(this.overlay);
  }

  open(): void {
    this.index = 0;
    this.overlay.hidden = false;
    this.show();
  }

  close(): void {
    this.overlay.hidden = true;
  }

  private show(): void {
    const example = TUTORIAL_EXAMPLES[this.index];
    this.overlay.textContent = "";

    const card = document.createElement("div");
    card.className = "tutorial-card";

    const heading = document.createElement("div");
    heading.className = "tutorial-heading";
    heading.textContent = `${this.index + 1} / ${TUTORIAL_EXAMPLES.length}  ${example.title}`;
    card.appendChild(heading);

    const prompt = document.createElement("div");
    prompt.className = "tutorial-prompt";
    prompt.textContent = `“${example.prompt}”`;
    card.appendChild(prompt);

    const note = document.createElement("p");
    note.className = "tutorial-note";
    note.textContent = example.note;
    card.appendChild(note);

    const buttons = document.createElement("div");
    buttons.className = "tutorial-buttons";
    if (this.index > 0) {
      buttons.appendChild(
        this.button("Back", "tutorial-back", () => {
          this.index--;
          this.show();
        }),
      );
    }
    buttons.appendChild(
      this.button("Try it", "tutorial-try", () => {
        this.onTry(example.prompt);
        this.close();
      }),
    );
    if (this.index < TUTORIAL_EXAMPLES.length - 1) {
      buttons.appendChild(
        this.button("Next", "tutorial-next", () => {
          this.index++;
          this.show();
        }),
      );
    }
    buttons.appendChild(this.button("Close", "tutorial-close", () => this.close()));
    card.appendChild(buttons);
    this.overlay.appendChild(card);
  }

  private button(
    label: string,
    className: string,
    onClick: () => void,
  ): HTMLButtonElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = className;
    button.textContent = label;
    button.addEventListener("click", onClick);
    return button;
  }
}
