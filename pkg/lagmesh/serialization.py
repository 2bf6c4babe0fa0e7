"""Config file schemas and parsing."""
import dataclasses
import json
import math

import marshmallow
import yaml

from . import geometry
from .kernels import FAMILIES, SURFACE_SPLINE
from .models import (
    CliConfig, KernelSpec, StudyConfig, COMMANDS, STUDIES,
    METRICS, BASIS, STUDY, TRUNCATION, THETA, GRAM
)


_INFINITY = ('inf', '+inf', '.inf', 'infinity')
_BASIS_KINDS = ('full', 'local')


def _validate_positive(value):
    if not value > 0:
        raise marshmallow.ValidationError('must be positive')


def _validate_unit_length(value):
    if not 0 < value < 1:
        raise marshmallow.ValidationError('must be in (0, 1)')


def _validate_fraction(value):
    if not 0 < value <= 1:
        raise marshmallow.ValidationError('must be in (0, 1]')


class Exponent(marshmallow.fields.Field):
    """
    An integrability exponent in [1, inf].

    Infinity loads from "inf" (or YAML .inf) and dumps as "inf" so the
    dumped form stays valid JSON.
    """
    default_error_messages = {
        'invalid': 'Not a valid exponent.',
        'range': 'exponent must be at least 1',
    }

    def _serialize(self, value, attr, obj):
        if value is None:
            return None
        return 'inf' if math.isinf(value) else float(value)

    def _deserialize(self, value, attr, data):
        if isinstance(value, str) and value.strip().lower() in _INFINITY:
            return math.inf
        if isinstance(value, bool):
            self.fail('invalid')
        try:
            result = float(value)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not result >= 1:
            self.fail('range')
        return result


class ClosedSchema(marshmallow.Schema):
    """Schema that rejects keys it does not declare."""

    @marshmallow.validates_schema(pass_original=True)
    def reject_unknown_fields(self, data, original_data):
        if not isinstance(original_data, dict):
            return
        unknown = sorted(set(original_data) - set(self.fields))
        if unknown:
            raise marshmallow.ValidationError('unknown field', unknown)


class KernelSpecSchema(ClosedSchema):
    """Schema of a kernel selection."""
    family = marshmallow.fields.String(
        required=True, validate=marshmallow.validate.OneOf(FAMILIES)
    )
    m = marshmallow.fields.Integer(
        required=True, validate=marshmallow.validate.Range(min=1)
    )

    @marshmallow.post_load
    def make_kernel_spec(self, data):
        return KernelSpec(**data)


class ConfigSchema(ClosedSchema):
    """
    Schema of a lagmesh config file.

    The file is flat: study parameters sit next to the command keys.
    Loading yields a CliConfig with defaults filled.
    """
    command = marshmallow.fields.String(
        required=True, validate=marshmallow.validate.OneOf(COMMANDS)
    )
    domain = marshmallow.fields.String(
        required=True,
        validate=marshmallow.validate.OneOf(geometry.domain_names())
    )
    seed = marshmallow.fields.Integer(missing=0)
    output_dir = marshmallow.fields.String(missing='.')
    verbosity = marshmallow.fields.Integer(
        missing=0, validate=marshmallow.validate.Range(min=0)
    )
    target_h = marshmallow.fields.Float(validate=_validate_unit_length)
    probe_resolution = marshmallow.fields.Float(validate=_validate_positive)
    kernel = marshmallow.fields.Nested(KernelSpecSchema)
    study = marshmallow.fields.String(
        validate=marshmallow.validate.OneOf(STUDIES)
    )
    h_levels = marshmallow.fields.List(marshmallow.fields.Float())
    p_values = marshmallow.fields.List(Exponent())
    sigma_values = marshmallow.fields.List(
        marshmallow.fields.Float(validate=marshmallow.validate.Range(min=0))
    )
    K_values = marshmallow.fields.List(
        marshmallow.fields.Float(validate=_validate_positive)
    )
    n_random_coeff = marshmallow.fields.Integer(
        validate=marshmallow.validate.Range(min=10)
    )
    quadrature_fraction = marshmallow.fields.Float(validate=_validate_fraction)
    local_K = marshmallow.fields.Float(validate=_validate_positive)
    basis_kinds = marshmallow.fields.List(
        marshmallow.fields.String(
            validate=marshmallow.validate.OneOf(_BASIS_KINDS)
        )
    )
    nikolskii_pairs = marshmallow.fields.List(
        marshmallow.fields.List(
            Exponent(), validate=marshmallow.validate.Length(equal=2)
        )
    )
    extension_margin = marshmallow.fields.Float(validate=_validate_positive)
    radii = marshmallow.fields.List(
        marshmallow.fields.Float(validate=_validate_positive)
    )
    log_floor = marshmallow.fields.Float(validate=_validate_positive)

    @marshmallow.validates('h_levels')
    def validate_h_levels(self, value):
        if not value:
            raise marshmallow.ValidationError('h_levels must not be empty')
        if any(not 0 < h < 1 for h in value):
            raise marshmallow.ValidationError('h_levels must all be in (0, 1)')
        if any(a <= b for a, b in zip(value, value[1:])):
            raise marshmallow.ValidationError(
                'h_levels must be strictly decreasing'
            )

    @marshmallow.validates_schema(skip_on_field_errors=True)
    def validate_command(self, data):
        command = data.get('command')
        if command in (METRICS, BASIS) and 'target_h' not in data:
            raise marshmallow.ValidationError(
                f'{command} command requires target_h', 'target_h'
            )
        if command in (BASIS, STUDY) and 'kernel' not in data:
            raise marshmallow.ValidationError(
                f'{command} command requires kernel', 'kernel'
            )
        if command == STUDY:
            self._validate_study(data)
        kernel = data.get('kernel')
        if kernel and data.get('domain') in geometry.domain_names():
            d = geometry.domain_dimension(data['domain'])
            if 2 * kernel.m <= d:
                raise marshmallow.ValidationError(
                    f'kernel order requires 2m > d = {d}', 'kernel'
                )

    def _validate_study(self, data):
        study = data.get('study')
        if not study:
            raise marshmallow.ValidationError(
                'study command requires study', 'study'
            )
        if study != GRAM and not data.get('h_levels'):
            raise marshmallow.ValidationError(
                f'{study} study requires h_levels', 'h_levels'
            )
        if study == TRUNCATION and len(data.get('K_values', [0] * 4)) < 3:
            raise marshmallow.ValidationError(
                'truncation study requires at least 3 K_values', 'K_values'
            )
        kernel = data.get('kernel')
        if study == THETA and kernel and kernel.family != SURFACE_SPLINE:
            raise marshmallow.ValidationError(
                'theta study requires a surface_spline kernel', 'kernel'
            )

    @marshmallow.post_load
    def make_config(self, data):
        if data.get('target_h') and 'probe_resolution' not in data:
            data['probe_resolution'] = data['target_h'] / 10
        if 'nikolskii_pairs' in data:
            data['nikolskii_pairs'] = [
                tuple(pair) for pair in data['nikolskii_pairs']
            ]
        study = None
        if data['command'] == STUDY:
            study = StudyConfig(
                kind=data['study'],
                **{
                    f.name: data[f.name]
                    for f in dataclasses.fields(StudyConfig)
                    if f.name in data
                }
            )
        return CliConfig(
            study=study,
            **{
                f.name: data[f.name]
                for f in dataclasses.fields(CliConfig)
                if f.name in data and f.name != 'study'
            }
        )


def parse_config(path):
    """
    Read and validate a config file.

    :param path: Path of a YAML (or JSON) config file
    :returns: CliConfig
    :raises ConfigParseError: On syntax errors, with line and column
    :raises ConfigSemanticError: On invalid content, naming the key
    """
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except yaml.MarkedYAMLError as ex:
        mark = ex.problem_mark or ex.context_mark
        raise ConfigParseError(
            ex.problem or str(ex), mark.line + 1, mark.column + 1
        ) from ex
    except yaml.YAMLError as ex:
        raise ConfigParseError(str(ex), None, None) from ex
    except OSError as ex:
        raise ConfigError(f'cannot read config {path}: {ex.strerror}') from ex
    return load_config(raw)


def load_config(raw):
    """
    Validate an already parsed config document.

    :param raw: Mapping of config keys
    :returns: CliConfig
    """
    if not isinstance(raw, dict):
        raise ConfigSemanticError('_schema', 'config must be a mapping')
    cfg, errors = ConfigSchema().load(raw)
    if errors:
        key, message = _first_error(errors)
        raise ConfigSemanticError(key, message)
    return cfg


def dump_config(cfg):
    """
    Convert a config to its flat file form.

    :param cfg: CliConfig
    :returns: Dictionary loadable by load_config
    """
    flat = {
        k: v for k, v in vars(cfg).items()
        if k != 'study' and v is not None
    }
    if cfg.study:
        study = vars(cfg.study).copy()
        study['study'] = study.pop('kind')
        flat.update((k, v) for k, v in study.items() if v is not None)
    return ConfigSchema().dump(flat).data


def serialize_config(cfg):
    """Config as deterministic JSON text."""
    return json.dumps(dump_config(cfg), indent=2, sort_keys=True)


def _first_error(errors, prefix=''):
    key = sorted(errors, key=str)[0]
    value = errors[key]
    name = f'{prefix}{key}'
    if isinstance(value, dict):
        return _first_error(value, f'{name}.')
    return name, value[0] if isinstance(value, list) else str(value)


class ConfigError(Exception):
    """General config error."""
    pass


class ConfigParseError(ConfigError):
    """Config file is not valid YAML or JSON."""

    def __init__(self, message, line, column, *args, **kwargs):
        """
        Create a config parse error.

        :param message: Parser problem description
        :param line: 1-based line of the problem
        :param column: 1-based column of the problem
        """
        super().__init__(message, *args, **kwargs)
        self.line = line
        self.column = column


class ConfigSemanticError(ConfigError):
    """Config content is invalid."""

    def __init__(self, key, message, *args, **kwargs):
        """
        Create a config semantic error.

        :param key: The offending key, dotted for nested keys
        :param message: Validation message
        """
        super().__init__(f'{key}: {message}', *args, **kwargs)
        self.key = key
