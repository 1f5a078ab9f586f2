from werkzeug.datastructures import MultiDict
from wtforms import FloatField, Form, IntegerField, StringField
from wtforms.validators import NumberRange, ValidationError

from models import NetworkFilter, PlantedConfig, SamplerConfig

MAX_SEED = 2 ** 64 - 1


def parse_interval(text):
    """Parse a half-open 'A:B' year range."""
    start, sep, end = text.partition(':')
    try:
        if not sep:
            raise ValueError
        start, end = int(start), int(end)
    except ValueError:
        raise ValidationError(f"Expected a year range A:B, got '{text}'.") from None
    if start >= end:
        raise ValidationError(f'Year range start must be below end, got {text}.')
    return start, end


def read_key_values(path, allowed):
    """Flat key=value file; blank lines and '#' comments are skipped."""
    pairs = []
    with open(path, encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            key, sep, value = line.partition('=')
            key = key.strip()
            if not sep:
                raise ValidationError(f'Line {number}: expected key=value.')
            if key not in allowed:
                raise ValidationError(f"Line {number}: unknown key '{key}' (allowed: {', '.join(allowed)}).")
            pairs.append((key, value.strip()))
    return MultiDict(pairs)


def bind_form(form_class, overrides, config_path=None):
    """Instantiate a form from an optional key=value file with non-None overrides applied on top."""
    formdata = read_key_values(config_path, list(form_class().data)) if config_path else MultiDict()
    for key, value in overrides.items():
        if value is not None:
            formdata.setlist(key, [str(value)])
    return form_class(formdata)


def form_errors(form):
    return '; '.join(f'{name}: {message}' for name, messages in form.errors.items() for message in messages)


class SamplerForm(Form):
    total_iterations = IntegerField('total_iterations', default=100_000, validators=[NumberRange(min=1)])
    burn_in = IntegerField('burn_in', default=20_000, validators=[NumberRange(min=1)])
    sample_interval = IntegerField('sample_interval', default=100, validators=[NumberRange(min=1)])
    restarts = IntegerField('restarts', default=10, validators=[NumberRange(min=1)])
    seed = IntegerField('seed', default=0, validators=[NumberRange(min=0, max=MAX_SEED)])

    def validate_burn_in(self, field):
        total = self.total_iterations.data
        if field.data is not None and total is not None and field.data >= total:
            raise ValidationError('burn_in must be smaller than total_iterations.')

    def validate_sample_interval(self, field):
        total, burn_in = self.total_iterations.data, self.burn_in.data
        if None in (field.data, total, burn_in):
            return
        if burn_in + field.data > total:
            raise ValidationError('burn_in + sample_interval must not exceed total_iterations.')

    def to_config(self):
        return SamplerConfig(
            total_iterations=self.total_iterations.data,
            burn_in=self.burn_in.data,
            sample_interval=self.sample_interval.data,
            restarts=self.restarts.data,
            seed=self.seed.data,
        )


class ReplicateForm(SamplerForm):
    replicates = IntegerField('replicates', default=100, validators=[NumberRange(min=2)])


class PlantedForm(Form):
    n_nodes = IntegerField('nodes', validators=[NumberRange(min=2)])
    n_edges = IntegerField('edges', validators=[NumberRange(min=1)])
    p_down = FloatField('pdown', validators=[NumberRange(min=0.5, max=1.0)])
    producer_skew = FloatField('skew', default=1.0, validators=[NumberRange(min=0.0)])
    seed = IntegerField('seed', default=0, validators=[NumberRange(min=0, max=MAX_SEED)])

    def to_config(self):
        return PlantedConfig(
            n_nodes=self.n_nodes.data,
            n_edges=self.n_edges.data,
            p_down=self.p_down.data,
            producer_skew=self.producer_skew.data,
            seed=self.seed.data,
        )


class FilterForm(Form):
    years = StringField('years')

    def validate_years(self, field):
        if field.data:
            parse_interval(field.data)

    def to_filter(self, disciplines=(), whitelist=None):
        return NetworkFilter(
            year_range=parse_interval(self.years.data) if self.years.data else None,
            disciplines=frozenset(disciplines) if disciplines else None,
            whitelist=whitelist,
        )
