/** Browser entry point: wire the controller to the page and the URL hash. */
import { SessionApi } from "./api.js";
import { SessionController } from "./controller.js";
import { AppView } from "./dom.js";
/**
 * Boot the app inside `win`. `base` points at the service origin ("" when
 * the bundle is served by the service itself); tests inject their own
 * fetch and clock.
 */
export function startApp(win, base = "", fetchImpl, options = {}) {
    const doc = win.document;
    const root = doc.getElementById("app");
    if (!root)
        throw new Error("missing #app mount point");
    const impl = fetchImpl ?? ((input, init) => win.fetch(input, init));
    const api = new SessionApi(base, impl);
    const controller = new SessionController(api, options);
    const view = new AppView(root, controller);
    view.mount();
    // keep the session id in the hash so a reload lands back in the session
    controller.subscribe((v) => {
        if (v.sessionId && win.location.hash !== `#session=${v.sessionId}`) {
            win.location.hash = `#session=${v.sessionId}`;
        }
    });
    const match = /#session=([0-9a-f]+)/.exec(win.location.hash);
    if (match && match[1]) {
        void controller.restore(match[1]);
    }
    return { controller, view };
}
// auto-start only when loaded as a page script, not when imported by tests
if (typeof window !== "undefined" && window.document?.getElementById("app")) {
    startApp(window);
}
