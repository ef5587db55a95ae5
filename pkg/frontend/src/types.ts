/** JSON shapes exchanged with the semnav service. */

export type Cell = [number, number]; // [row, col]

export interface PaletteClass {
  id: number;
  name: string;
  color: [number, number, number];
}

export interface Palette {
  classes: PaletteClass[];
}

export interface WorkspaceInfo {
  id: string;
  width: number;
  height: number;
  palette: Palette;
  has_labels: boolean;
  has_semantic: boolean;
  profiles: string[];
  classes_learned: string[];
  model_version: number;
  load_errors: string[];
}

export interface JobRecord {
  id: string;
  kind: string;
  status: 'queued' | 'running' | 'done' | 'failed';
  progress: number;
  result: string | null;
  error: string | null;
  workspace?: string;
}

export interface ClassShare {
  cells_on_alternative: number;
  cost_share_alternative: number;
  cells_on_chosen: number;
  cost_share_chosen: number;
}

export interface Explanation {
  alternative: { path: Cell[]; total_cost: number; total_distance: number };
  per_class_attribution: Record<string, ClassShare>;
  top_class: string | null;
  summary: string;
}

export interface RouteResponse {
  path: Cell[];
  total_cost: number;
  total_distance: number;
  explanation: Explanation;
  route_id: string;
  profile: string;
  blend: number;
  model_version: number;
}

export type OverlayLayer = 'semantic' | `cost:${string}` | `route:${string}`;
