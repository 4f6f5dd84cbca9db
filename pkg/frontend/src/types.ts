/** JSON shapes served by the edit-session HTTP service. */

export interface InstanceView {
  instance_id: string;
  class_label: string;
  bbox: [number, number, number, number];
  distance_m: number;
  attributes: Record<string, string>;
}

export interface AnnotationView {
  image_id: string;
  width: number;
  height: number;
  global: Record<string, string>;
  instances: InstanceView[];
  caption: string;
  caption_paraphrases: string[];
  missing_facets: string[];
}

export interface EditSpecView {
  action: string;
  subject_class: string;
  bbox: [number, number, number, number];
  distance_m: number;
  instruction_sentence: string;
  target_description: string | null;
}

export interface SessionSnapshot {
  session_id: string;
  annotation: AnnotationView;
  specs: EditSpecView[];
  history_length: number;
}

export interface EditRequest {
  action: string;
  bbox: [number, number, number, number];
  target_description?: string;
}

export interface EditResponse {
  index: number;
  spec: EditSpecView;
  instruction_sentence: string;
  matched_instance: string | null;
}

export interface RenderResponse {
  history_length: number;
  preview_png_b64: string;
}

export interface Banks {
  actions: string[];
  classes: string[];
  vehicle_colors: string[];
  vehicle_objects: string[];
  pedestrian_adjectives: string[];
  pedestrian_articles: string[];
  pedestrian_ages: string[];
  traffic_light_colors: string[];
  global_attributes: Record<string, string[]>;
}

export interface ServiceErrorBody {
  code: string;
  message: string;
}
