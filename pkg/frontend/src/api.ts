/** HTTP client for the pipeline's annotation/inspection API.
 *
 * All persistence goes through this client; the UI holds no other state.
 * Server rejections (422) surface as ApiError with the server's detail
 * message so the UI can show it verbatim. */

import type { CandidatesDoc, GroundTruthGraph, PredictionGraph } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `API unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async listScenes(): Promise<string[]> {
    return (await this.request("/scenes")).json();
  }

  async getCandidates(sceneId: string): Promise<CandidatesDoc> {
    return (await this.request(`/scenes/${sceneId}/candidates`)).json();
  }

  async getPrediction(sceneId: string): Promise<PredictionGraph> {
    return (await this.request(`/scenes/${sceneId}/prediction`)).json();
  }

  async getAnnotation(sceneId: string): Promise<GroundTruthGraph> {
    return (await this.request(`/scenes/${sceneId}/annotation`)).json();
  }

  async putAnnotation(sceneId: string, graph: GroundTruthGraph): Promise<GroundTruthGraph> {
    const response = await this.request(`/scenes/${sceneId}/annotation`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(graph),
    });
    return response.json();
  }

  async getPointcloud(sceneId: string, candidateId: string): Promise<ArrayBuffer> {
    const response = await this.request(
      `/scenes/${sceneId}/pointcloud?candidate=${encodeURIComponent(candidateId)}`,
    );
    return response.arrayBuffer();
  }

  frameColorUrl(sceneId: string, frameIndex: number): string {
    return `${this.baseUrl}/scenes/${sceneId}/frames/${frameIndex}/color`;
  }
}
