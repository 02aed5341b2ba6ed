/** Thin typed client over the four session endpoints. */
export class ApiError extends Error {
    status;
    code;
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
    }
}
async function unwrap(res) {
    if (res.ok) {
        return (await res.json());
    }
    let code = "unknown";
    let message = `request failed with status ${res.status}`;
    try {
        const body = (await res.json());
        if (body.code)
            code = body.code;
        if (body.message)
            message = body.message;
    }
    catch {
        // non-JSON error body; keep the status-line message
    }
    throw new ApiError(res.status, code, message);
}
export class SessionApi {
    base;
    fetchImpl;
    /** `base` is the service origin, e.g. "" for same-origin or a full URL. */
    constructor(base, fetchImpl) {
        this.base = base.replace(/\/$/, "");
        this.fetchImpl = fetchImpl;
    }
    async createSession(req) {
        const res = await this.fetchImpl(`${this.base}/sessions`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(req),
        });
        return unwrap(res);
    }
    async submitRatings(sessionId, ratings) {
        const res = await this.fetchImpl(`${this.base}/sessions/${sessionId}/ratings`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ ratings }),
        });
        return unwrap(res);
    }
    async getBatch(sessionId) {
        const res = await this.fetchImpl(`${this.base}/sessions/${sessionId}/batch`);
        return unwrap(res);
    }
    async getState(sessionId) {
        const res = await this.fetchImpl(`${this.base}/sessions/${sessionId}/state`);
        return unwrap(res);
    }
}
