# Generated by Django 5.2.7 on 2026-10-18 12:00

import django.core.validators
import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='TblExperimentRun',
            fields=[
                ('run_id', models.AutoField(primary_key=True, serialize=False)),
                ('comando', models.CharField(default='evaluate', max_length=20, verbose_name='Comando')),
                ('fecha_inicio', models.DateTimeField(auto_now_add=True, verbose_name='Fecha de inicio')),
                ('config', models.JSONField(verbose_name='Configuración resuelta')),
                ('hash_config', models.CharField(db_index=True, max_length=64, verbose_name='Hash de la configuración')),
                ('seed', models.BigIntegerField(verbose_name='Semilla')),
                ('metodos', models.CharField(max_length=40, verbose_name='Métodos')),
                ('duracion_ms', models.FloatField(default=0.0, verbose_name='Duración (ms)')),
                ('directorio_salida', models.CharField(blank=True, max_length=500, verbose_name='Directorio de salida')),
                ('ruta_resultados', models.CharField(blank=True, max_length=500, verbose_name='Ruta de resultados')),
                ('tamanio_bytes', models.BigIntegerField(default=0, verbose_name='Tamaño (bytes)')),
            ],
            options={
                'verbose_name': 'Corrida de experimento',
                'verbose_name_plural': 'Corridas de experimentos',
                'db_table': 'TBL_EXPERIMENT_RUN',
                'ordering': ['-fecha_inicio'],
            },
        ),
        migrations.CreateModel(
            name='TblMethodResult',
            fields=[
                ('result_id', models.AutoField(primary_key=True, serialize=False)),
                ('method', models.CharField(max_length=10, verbose_name='Método')),
                ('capacity_bytes', models.BigIntegerField(validators=[django.core.validators.MinValueValidator(0)])),
                ('rmse', models.FloatField()),
                ('hit_rate', models.FloatField(validators=[django.core.validators.MinValueValidator(0.0), django.core.validators.MaxValueValidator(1.0)])),
                ('avg_delay_s', models.FloatField(validators=[django.core.validators.MinValueValidator(0.0)])),
                ('local', models.IntegerField(default=0)),
                ('neighbor', models.IntegerField(default=0)),
                ('cs', models.IntegerField(default=0)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='resultados', to='core.tblexperimentrun')),
            ],
            options={
                'verbose_name': 'Resultado por método',
                'verbose_name_plural': 'Resultados por método',
                'db_table': 'TBL_METHOD_RESULT',
                'ordering': ['run', 'method', 'capacity_bytes'],
                'constraints': [models.UniqueConstraint(fields=('run', 'method', 'capacity_bytes'), name='uniq_run_method_capacity')],
            },
        ),
    ]
