/** Typed client for the semnav HTTP API.

Every mutating call maps 1:1 to a documented endpoint and is recorded in a
request log; replaying the log against a fresh server reproduces identical
server state (the console itself computes nothing).
*/

import type { Cell, JobRecord, RouteResponse, WorkspaceInfo } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface LoggedPart {
  kind: 'text' | 'file';
  value: string | Uint8Array;
  filename?: string;
}

export interface LoggedRequest {
  method: string;
  path: string;
  contentType: 'json' | 'octet-stream' | 'multipart';
  json?: unknown;
  body?: Uint8Array;
  parts?: Record<string, LoggedPart>;
}

export interface RouteQueryBody {
  start: Cell;
  goal?: Cell;
  goals?: Cell[];
  profile?: string;
  blend?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function errorOf(response: Response): Promise<ApiError> {
  let detail = `${response.status}`;
  try {
    const doc = await response.json();
    if (doc && typeof doc.detail === 'string') detail = doc.detail;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(response.status, detail);
}

function toFormData(parts: Record<string, LoggedPart>): FormData {
  const form = new FormData();
  for (const [name, part] of Object.entries(parts)) {
    if (part.kind === 'text') {
      form.append(name, part.value as string);
    } else {
      const bytes = part.value as Uint8Array;
      const copy = new Uint8Array(bytes); // detach from any larger buffer
      form.append(name, new Blob([copy]), part.filename ?? name);
    }
  }
  return form;
}

export class ApiClient {
  readonly log: LoggedRequest[] = [];

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async send(request: LoggedRequest): Promise<Response> {
    if (request.method !== 'GET') this.log.push(request);
    const init: RequestInit = { method: request.method };
    if (request.contentType === 'json' && request.json !== undefined) {
      init.body = JSON.stringify(request.json);
      init.headers = { 'content-type': 'application/json' };
    } else if (request.contentType === 'octet-stream' && request.body) {
      init.body = new Uint8Array(request.body);
      init.headers = { 'content-type': 'application/octet-stream' };
    } else if (request.contentType === 'multipart' && request.parts) {
      init.body = toFormData(request.parts);
    }
    const response = await this.fetchImpl(this.baseUrl + request.path, init);
    if (!response.ok) throw await errorOf(response);
    return response;
  }

  async createWorkspace(imagePpm: Uint8Array, paletteJson: string): Promise<string> {
    const response = await this.send({
      method: 'POST',
      path: '/workspaces',
      contentType: 'multipart',
      parts: {
        image: { kind: 'file', value: imagePpm, filename: 'image.ppm' },
        palette: { kind: 'text', value: paletteJson },
      },
    });
    return (await response.json()).id as string;
  }

  async uploadLabels(workspaceId: string, labelsPgm: Uint8Array): Promise<void> {
    await this.send({
      method: 'POST',
      path: `/workspaces/${workspaceId}/labels`,
      contentType: 'octet-stream',
      body: labelsPgm,
    });
  }

  async trainSeg(workspaceId: string, config: Record<string, unknown>): Promise<string> {
    const response = await this.send({
      method: 'POST',
      path: `/workspaces/${workspaceId}/jobs/train-seg`,
      contentType: 'json',
      json: config,
    });
    return (await response.json()).job_id as string;
  }

  async addClass(
    workspaceId: string,
    name: string,
    pairs: Array<{ image: Uint8Array; mask: Uint8Array }>,
    options: { color?: [number, number, number]; config?: Record<string, unknown> } = {},
  ): Promise<string> {
    const parts: Record<string, LoggedPart> = {
      name: { kind: 'text', value: name },
    };
    if (options.color) parts.color = { kind: 'text', value: JSON.stringify(options.color) };
    if (options.config) parts.config = { kind: 'text', value: JSON.stringify(options.config) };
    pairs.forEach((pair, index) => {
      parts[`support_image_${index}`] = {
        kind: 'file',
        value: pair.image,
        filename: `support_${index}.ppm`,
      };
      parts[`support_mask_${index}`] = {
        kind: 'file',
        value: pair.mask,
        filename: `mask_${index}.pgm`,
      };
    });
    const response = await this.send({
      method: 'POST',
      path: `/workspaces/${workspaceId}/classes`,
      contentType: 'multipart',
      parts,
    });
    return (await response.json()).job_id as string;
  }

  async trainIrl(
    workspaceId: string,
    body: { profile: string; demos: unknown; config?: Record<string, unknown> },
  ): Promise<string> {
    const response = await this.send({
      method: 'POST',
      path: `/workspaces/${workspaceId}/jobs/train-irl`,
      contentType: 'json',
      json: body,
    });
    return (await response.json()).job_id as string;
  }

  async queryRoute(workspaceId: string, body: RouteQueryBody): Promise<RouteResponse> {
    const response = await this.send({
      method: 'POST',
      path: `/workspaces/${workspaceId}/routes`,
      contentType: 'json',
      json: body,
    });
    return (await response.json()) as RouteResponse;
  }

  async jobStatus(jobId: string): Promise<JobRecord> {
    const response = await this.send({
      method: 'GET',
      path: `/jobs/${jobId}`,
      contentType: 'json',
    });
    return (await response.json()) as JobRecord;
  }

  async workspaceInfo(workspaceId: string): Promise<WorkspaceInfo> {
    const response = await this.send({
      method: 'GET',
      path: `/workspaces/${workspaceId}`,
      contentType: 'json',
    });
    return (await response.json()) as WorkspaceInfo;
  }

  async overlay(workspaceId: string, layer: string): Promise<Uint8Array> {
    const response = await this.send({
      method: 'GET',
      path: `/workspaces/${workspaceId}/overlay?layer=${encodeURIComponent(layer)}`,
      contentType: 'octet-stream',
    });
    return new Uint8Array(await response.arrayBuffer());
  }
}

/** Re-issue a recorded request log against a fresh server.

Requests that spawn jobs are awaited to completion so the replay respects
the one-training-job-per-workspace rule exactly like the live session did.
*/
export async function replayLog(
  log: LoggedRequest[],
  baseUrl: string,
  fetchImpl: FetchLike = (url, init) => fetch(url, init),
  pollDelayMs = 100,
): Promise<void> {
  const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));
  for (const request of log) {
    const init: RequestInit = { method: request.method };
    if (request.contentType === 'json' && request.json !== undefined) {
      init.body = JSON.stringify(request.json);
      init.headers = { 'content-type': 'application/json' };
    } else if (request.contentType === 'octet-stream' && request.body) {
      init.body = new Uint8Array(request.body);
      init.headers = { 'content-type': 'application/octet-stream' };
    } else if (request.contentType === 'multipart' && request.parts) {
      init.body = toFormData(request.parts);
    }
    const response = await fetchImpl(baseUrl + request.path, init);
    if (!response.ok) throw await errorOf(response);
    const text = await response.text();
    try {
      const doc = JSON.parse(text);
      if (doc && typeof doc.job_id === 'string') {
        for (;;) {
          const jobResponse = await fetchImpl(`${baseUrl}/jobs/${doc.job_id}`);
          const job = (await jobResponse.json()) as JobRecord;
          if (job.status === 'done') break;
          if (job.status === 'failed') throw new Error(`replayed job failed: ${job.error}`);
          await sleep(pollDelayMs);
        }
      }
    } catch (err) {
      if (err instanceof SyntaxError) continue; // non-JSON response body
      throw err;
    }
  }
}
