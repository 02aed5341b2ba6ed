/**
 * DOM renderer. Full re-render happens only when the screen identity
 * changes (phase, batch, inputs arming); everything that moves inside one
 * screen (countdown, value labels, submit gating, chart) is patched in
 * place so slider drags and focus survive.
 */
export class AppView {
    root;
    doc;
    controller;
    screenKey = "";
    targetUri = "";
    constructor(root, controller) {
        this.root = root;
        this.doc = root.ownerDocument;
        this.controller = controller;
    }
    mount() {
        this.controller.subscribe((view) => this.render(view));
        this.render(this.controller.view());
    }
    render(view) {
        // "submitting" is the rating screen with inputs frozen, not a new screen
        const phaseKey = view.phase === "submitting" ? "rating" : view.phase;
        const key = [
            phaseKey,
            view.iteration,
            view.batch.map((b) => b.item_id).join(","),
            String(view.error),
        ].join("|");
        if (key !== this.screenKey) {
            this.screenKey = key;
            this.rebuild(view);
        }
        this.patch(view);
    }
    // --------------------------------------------------------- screen build
    rebuild(view) {
        this.root.textContent = "";
        switch (view.phase) {
            case "setup":
                this.root.appendChild(this.buildSetup());
                break;
            case "target":
                this.root.appendChild(this.buildTarget());
                break;
            case "rating":
            case "submitting":
                this.root.appendChild(this.buildRating(view));
                break;
            case "done":
                this.root.appendChild(this.buildDone(view));
                break;
            case "error":
                this.root.appendChild(this.buildError(view));
                break;
        }
    }
    buildSetup() {
        const form = this.el("form", { id: "setup" });
        form.innerHTML = `
      <h1>stimloop</h1>
      <label>mode
        <select id="mode" name="mode">
          <option value="mental-match">mental-match</option>
          <option value="emotion">emotion</option>
        </select>
      </label>
      <label>corpus <input id="corpus" name="corpus" value="default"></label>
      <label>seed <input id="seed" name="seed" type="number" value="0"></label>
      <label>batch size
        <input id="batch-size" name="batchSize" type="number" min="1" value="10">
      </label>
      <label>iterations
        <input id="iterations" name="maxIterations" type="number" min="1" value="10">
      </label>
      <label>target image URI (mental-match)
        <input id="target-uri" name="targetUri" placeholder="/assets/target.png">
      </label>
      <button id="start" type="submit">start session</button>
    `;
        form.addEventListener("submit", (ev) => {
            ev.preventDefault();
            const values = this.readSetup(form);
            this.targetUri = values.targetUri;
            void this.controller.start(values.mode, values.corpus, values.seed, {
                batch_size: values.batchSize,
                max_iterations: values.maxIterations,
            });
        });
        return form;
    }
    readSetup(form) {
        const get = (id) => form.querySelector(`#${id}`);
        return {
            mode: get("mode").value === "emotion" ? "emotion" : "mental-match",
            corpus: get("corpus").value || "default",
            seed: Math.trunc(Number(get("seed").value) || 0),
            batchSize: Math.max(1, Math.trunc(Number(get("batch-size").value) || 10)),
            maxIterations: Math.max(1, Math.trunc(Number(get("iterations").value) || 10)),
            targetUri: get("target-uri").value.trim(),
        };
    }
    buildTarget() {
        const screen = this.el("section", { id: "target-screen" });
        const media = this.targetUri
            ? `<img class="target-img" src="${this.targetUri}" alt="target stimulus">`
            : `<p>Hold your target firmly in mind.</p>`;
        screen.innerHTML = `
      <h2>Memorize the target</h2>
      ${media}
      <p>Rating begins in <strong id="countdown">--</strong> s</p>
    `;
        return screen;
    }
    buildRating(view) {
        const form = this.el("form", { id: "rating" });
        const heading = this.el("h2");
        heading.textContent = `Step ${view.iteration + 1} of ${view.maxIterations}`;
        form.appendChild(heading);
        const grid = this.el("div", { id: "batch", class: "grid" });
        for (const item of view.batch) {
            grid.appendChild(this.buildCard(item));
        }
        form.appendChild(grid);
        const bar = this.el("div", { class: "actions" });
        bar.innerHTML = `
      <span id="rated-count"></span>
      <button id="submit" type="submit" disabled>submit ratings</button>
    `;
        form.appendChild(bar);
        form.appendChild(this.el("div", { id: "chart-box" }));
        form.addEventListener("submit", (ev) => {
            ev.preventDefault();
            void this.controller.submit();
        });
        return form;
    }
    buildCard(item) {
        const card = this.el("figure", { class: "card" });
        card.dataset["itemId"] = item.item_id;
        const media = item.payload
            ? `<img src="${item.payload}" alt="stimulus ${item.item_id}">`
            : `<div class="placeholder">${item.item_id}</div>`;
        card.innerHTML = `
      ${media}
      <figcaption>
        <input class="rating-slider" type="range" min="0" max="1" step="0.01"
               value="0.5" disabled aria-label="rating for ${item.item_id}">
        <input class="rating-entry" type="number" min="0" max="1" step="0.01"
               disabled aria-label="typed rating for ${item.item_id}">
        <output class="rating-value">--</output>
      </figcaption>
    `;
        const slider = card.querySelector(".rating-slider");
        const entry = card.querySelector(".rating-entry");
        slider.addEventListener("input", () => {
            this.controller.setRating(item.item_id, Number(slider.value));
        });
        entry.addEventListener("input", () => {
            if (entry.value === "")
                return;
            this.controller.setRating(item.item_id, Number(entry.value));
        });
        return card;
    }
    buildDone(view) {
        const screen = this.el("section", { id: "done" });
        const best = view.best;
        const media = best?.payload
            ? `<img id="best-img" src="${best.payload}" alt="best stimulus">`
            : `<div class="placeholder">${best ? best.item_id : "?"}</div>`;
        screen.innerHTML = `
      <h2>Session complete</h2>
      <figure id="best" data-item-id="${best ? best.item_id : ""}">
        ${media}
        <figcaption>
          best item <strong id="best-id">${best ? best.item_id : "none"}</strong>
          (reward <span id="best-reward">${best ? best.reward.toFixed(3) : "--"}</span>)
        </figcaption>
      </figure>
      <div id="chart-box"></div>
    `;
        return screen;
    }
    buildError(view) {
        const box = this.el("section", { id: "error" });
        box.innerHTML = `
      <h2>Something went wrong</h2>
      <p id="error-message">${view.error ?? "unknown error"}</p>
      <button id="retry" type="button">retry</button>
    `;
        box.querySelector("#retry").addEventListener("click", () => {
            void this.controller.retry();
        });
        return box;
    }
    // --------------------------------------------------------- in-place bits
    patch(view) {
        if (view.phase === "target") {
            const el = this.root.querySelector("#countdown");
            if (el)
                el.textContent = String(view.targetRemaining);
        }
        if (view.phase === "rating" || view.phase === "submitting") {
            this.patchRating(view);
        }
        this.patchChart(view);
    }
    patchRating(view) {
        const submitting = view.phase === "submitting";
        for (const card of this.root.querySelectorAll(".card")) {
            const id = card.dataset["itemId"] ?? "";
            const rated = view.ratings.get(id);
            const slider = card.querySelector(".rating-slider");
            const entry = card.querySelector(".rating-entry");
            const label = card.querySelector(".rating-value");
            slider.disabled = !view.inputsEnabled || submitting;
            entry.disabled = !view.inputsEnabled || submitting;
            label.textContent = rated === undefined ? "--" : rated.toFixed(2);
            const active = this.doc.activeElement;
            if (rated !== undefined && active !== slider && active !== entry) {
                slider.value = String(rated);
            }
        }
        const submit = this.root.querySelector("#submit");
        if (submit)
            submit.disabled = !view.canSubmit;
        const count = this.root.querySelector("#rated-count");
        if (count) {
            count.textContent = view.inputsEnabled
                ? `${view.ratings.size}/${view.batch.length} rated`
                : "look at each image first";
        }
    }
    patchChart(view) {
        const box = this.root.querySelector("#chart-box");
        if (!box)
            return;
        const len = view.progress.length;
        if (box.getAttribute("data-len") === String(len))
            return;
        box.setAttribute("data-len", String(len));
        box.innerHTML = len === 0 ? "" : this.chartSvg(view.progress);
    }
    /** Mean rating per step, values straight from the service. */
    chartSvg(series) {
        const w = 300;
        const h = 80;
        const step = series.length > 1 ? w / (series.length - 1) : 0;
        const points = series
            .map((v, i) => `${(i * step).toFixed(1)},${(h - v * h).toFixed(1)}`)
            .join(" ");
        const dots = series
            .map((v, i) => `<circle class="pt" cx="${(i * step).toFixed(1)}" ` +
            `cy="${(h - v * h).toFixed(1)}" r="2"></circle>`)
            .join("");
        return `
      <svg id="chart" viewBox="-4 -4 ${w + 8} ${h + 8}" width="${w}" height="${h}"
           role="img" aria-label="mean rating per step">
        <polyline points="${points}" fill="none"></polyline>${dots}
      </svg>`;
    }
    el(tag, attrs = {}) {
        const node = this.doc.createElement(tag);
        for (const [k, v] of Object.entries(attrs)) {
            node.setAttribute(k, v);
        }
        return node;
    }
}
