/**
 * Shared wire contract with the rating service.
 *
 * This file is the single description of the JSON the service speaks; the
 * client builds nothing beyond what these shapes carry. All optimization
 * state (scores, batches, means, best item) originates server-side.
 */
export {};
